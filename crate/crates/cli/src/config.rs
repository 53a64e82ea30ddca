//! TOML run configuration. Field names carry their units.

use crate::CliError;
use ringsource::model::{DeviceSpec, MziCouplerSpec, PointCoupler, RingGeometry, WaveguideModel};
use ringsource::pair::GapCouplingMap;
use ringsource::presets;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub device: Option<DeviceConfig>,
    /// Replaces the heater phases (ring, input MZI, output MZI) of the device.
    pub heater_phases_rad: Option<[f64; 3]>,
    pub gap_map: Option<GapMapConfig>,
    pub spectrum: Option<SpectrumConfig>,
    pub figures: Option<FiguresConfig>,
    pub coinc: Option<CoincConfig>,
    pub tune: Option<TuneConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub radius_um: f64,
    #[serde(default)]
    pub ring_heater_phase_rad: f64,
    #[serde(default)]
    pub waveguide: WaveguideConfig,
    pub input_coupler: CouplerConfig,
    pub output_coupler: CouplerConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WaveguideConfig {
    pub effective_index: f64,
    pub group_index: f64,
    pub reference_wavelength_nm: f64,
    pub loss_db_per_cm: f64,
}

impl Default for WaveguideConfig {
    fn default() -> Self {
        Self {
            effective_index: 2.4,
            group_index: 4.2,
            reference_wavelength_nm: 1550.0,
            loss_db_per_cm: 0.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CouplerConfig {
    Point(PointCouplerConfig),
    Mzi(MziConfig),
}

/// Exactly one of the three fields must be given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointCouplerConfig {
    pub gap_nm: Option<f64>,
    pub kappa_sq: Option<f64>,
    pub t_sq: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MziConfig {
    pub sub_coupler_a: PointCouplerConfig,
    pub sub_coupler_b: PointCouplerConfig,
    pub bus_arm_um: f64,
    pub ring_arm_um: f64,
    #[serde(default)]
    pub heater_phase_rad: f64,
    #[serde(default)]
    pub phase_bias_rad: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapMapConfig {
    pub kappa0: f64,
    pub decay_length_nm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub points: usize,
    pub prominence_db: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            start_nm: 1535.0,
            stop_nm: 1565.0,
            points: 30_001,
            prominence_db: 1.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiguresConfig {
    pub t1_sq_points: usize,
    /// Round-trip loss assumed by the theory curve.
    pub ring_loss_db: f64,
    pub pump_wavelength_nm: f64,
    /// Input gaps of a device family sharing the configured drop coupler.
    pub gaps_nm: Option<Vec<f64>>,
    /// Count intracavity scattering as a third exit channel.
    pub loss_aware: bool,
}

impl Default for FiguresConfig {
    fn default() -> Self {
        Self {
            t1_sq_points: 200,
            ring_loss_db: 0.0,
            pump_wavelength_nm: 1550.0,
            gaps_nm: None,
            loss_aware: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoincConfig {
    pub pair_rate_ring_hz: f64,
    pub pair_rate_bus_background_hz: f64,
    /// Routing override; taken from the device when absent.
    pub p_drop: Option<f64>,
    pub p_thru: Option<f64>,
    pub loss_aware_routing: bool,
    pub pump_wavelength_nm: f64,
    /// Through signal, through idler, drop signal, drop idler.
    pub path_efficiencies: [f64; 4],
    pub detector_efficiency: f64,
    pub dark_count_rate_hz: f64,
    pub timing_jitter_ps: f64,
    pub bin_width_ps: f64,
    pub span_ns: f64,
    pub integration_time_s: f64,
    pub peak_window_ps: f64,
    pub rng_seed: u64,
    pub off_resonance_control: bool,
    pub path_swap: bool,
}

impl Default for CoincConfig {
    fn default() -> Self {
        Self {
            pair_rate_ring_hz: 20_000.0,
            pair_rate_bus_background_hz: 0.0,
            p_drop: None,
            p_thru: None,
            loss_aware_routing: false,
            pump_wavelength_nm: 1550.0,
            path_efficiencies: [1.0; 4],
            detector_efficiency: 1.0,
            dark_count_rate_hz: 0.0,
            timing_jitter_ps: 0.0,
            bin_width_ps: 81.0,
            span_ns: 10.0,
            integration_time_s: 10.0,
            peak_window_ps: 243.0,
            rng_seed: 1,
            off_resonance_control: false,
            path_swap: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuneConfig {
    pub steps_per_axis: usize,
    pub refine: bool,
    pub tolerance_rad: f64,
    /// Pump extinction, pump drop suppression, signal/idler extraction.
    pub weights: [f64; 3],
    pub ceiling_db: f64,
    pub pump_near_nm: f64,
    pub max_voltage_v: f64,
    /// Defaults to 1.05·2π at the maximum voltage for every heater.
    pub phase_per_volt_sq: Option<[f64; 3]>,
    /// Skip the grid and refine from these voltages.
    pub start_voltages_v: Option<[f64; 3]>,
    pub spectrum_span_nm: f64,
    pub spectrum_points: usize,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            steps_per_axis: 11,
            refine: true,
            tolerance_rad: 1e-4,
            weights: ringsource::tuning::TuningObjective::DEFAULT_WEIGHTS,
            ceiling_db: 60.0,
            pump_near_nm: 1550.0,
            max_voltage_v: 10.0,
            phase_per_volt_sq: None,
            start_voltages_v: None,
            spectrum_span_nm: 30.0,
            spectrum_points: 30_001,
        }
    }
}

/// Built-in starting points selectable with `--preset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Symmetric,
    Fig4Family,
    Table1Dmzr,
}

impl Preset {
    pub const NAMES: [&'static str; 3] = ["symmetric", "fig4-family", "table1-dmzr"];

    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "symmetric" => Ok(Preset::Symmetric),
            "fig4-family" => Ok(Preset::Fig4Family),
            "table1-dmzr" | "table1" => Ok(Preset::Table1Dmzr),
            other => Err(CliError::Config(format!(
                "--preset: unknown preset '{other}', expected one of {}",
                Preset::NAMES.join(", ")
            ))),
        }
    }

    fn device(&self) -> ringsource::Result<DeviceSpec> {
        match self {
            Preset::Symmetric | Preset::Fig4Family => {
                presets::gap_family_device(&presets::default_gap_map(), presets::GAP_FAMILY_DROP_GAP)
            }
            Preset::Table1Dmzr => presets::table1_dmzr(),
        }
    }

    fn figures(&self) -> FiguresConfig {
        match self {
            Preset::Fig4Family => FiguresConfig {
                gaps_nm: Some(presets::GAP_FAMILY_INPUT_GAPS.iter().map(|g| g * 1e9).collect()),
                ..Default::default()
            },
            _ => FiguresConfig::default(),
        }
    }
}

/// Everything a command needs, validated.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub device: DeviceSpec,
    pub gap_map: GapCouplingMap,
    pub spectrum: SpectrumConfig,
    pub figures: FiguresConfig,
    pub coinc: CoincConfig,
    pub tune: TuneConfig,
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("--config: cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn invalid(path: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {msg}"))
}

fn check(path: &str, ok: bool, msg: impl std::fmt::Display) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(path, msg))
    }
}

fn point_coupler(path: &str, c: &PointCouplerConfig, map: &GapCouplingMap) -> Result<PointCoupler, CliError> {
    let given = [c.gap_nm.is_some(), c.kappa_sq.is_some(), c.t_sq.is_some()]
        .iter()
        .filter(|x| **x)
        .count();
    check(path, given == 1, "give exactly one of gap_nm, kappa_sq, t_sq")?;
    let kappa_sq = if let Some(gap) = c.gap_nm {
        check(&format!("{path}.gap_nm"), gap > 0.0, format!("must be positive, got {gap}"))?;
        map.kappa_sq(gap * 1e-9)
    } else if let Some(k) = c.kappa_sq {
        check(&format!("{path}.kappa_sq"), (0.0..=1.0).contains(&k), format!("must lie in [0, 1], got {k}"))?;
        k
    } else {
        let t = c.t_sq.unwrap_or_default();
        check(&format!("{path}.t_sq"), (0.0..=1.0).contains(&t), format!("must lie in [0, 1], got {t}"))?;
        1.0 - t
    };
    PointCoupler::from_power_coupling(kappa_sq).map_err(|e| invalid(path, e))
}

fn coupler(path: &str, c: &CouplerConfig, map: &GapCouplingMap) -> Result<ringsource::model::Coupler, CliError> {
    match c {
        CouplerConfig::Point(p) => Ok(point_coupler(path, p, map)?.into()),
        CouplerConfig::Mzi(m) => {
            let a = point_coupler(&format!("{path}.sub_coupler_a"), &m.sub_coupler_a, map)?;
            let b = point_coupler(&format!("{path}.sub_coupler_b"), &m.sub_coupler_b, map)?;
            for (name, v) in [("bus_arm_um", m.bus_arm_um), ("ring_arm_um", m.ring_arm_um)] {
                check(&format!("{path}.{name}"), v > 0.0 && v.is_finite(), format!("must be positive, got {v}"))?;
            }
            let spec = MziCouplerSpec::new(a, b, m.bus_arm_um * 1e-6, m.ring_arm_um * 1e-6)
                .map_err(|e| invalid(path, e))?
                .with_tunable_phase(m.heater_phase_rad)
                .with_phase_bias(m.phase_bias_rad);
            Ok(spec.into())
        }
    }
}

fn device(c: &DeviceConfig, map: &GapCouplingMap) -> Result<DeviceSpec, CliError> {
    check("device.radius_um", c.radius_um > 0.0 && c.radius_um.is_finite(), format!("must be positive, got {}", c.radius_um))?;
    let w = &c.waveguide;
    check(
        "device.waveguide.loss_db_per_cm",
        w.loss_db_per_cm >= 0.0,
        format!("must be non-negative, got {}", w.loss_db_per_cm),
    )?;
    let waveguide = WaveguideModel::new(
        w.effective_index,
        w.group_index,
        w.reference_wavelength_nm * 1e-9,
        w.loss_db_per_cm * 100.0,
    )
    .map_err(|e| invalid("device.waveguide", e))?;
    let mut geometry = RingGeometry::new(c.radius_um * 1e-6).map_err(|e| invalid("device.radius_um", e))?;
    geometry.ring_phase_offset = c.ring_heater_phase_rad;
    let input = coupler("device.input_coupler", &c.input_coupler, map)?;
    let output = coupler("device.output_coupler", &c.output_coupler, map)?;
    DeviceSpec::new(geometry, waveguide, input, output).map_err(|e| invalid("device", e))
}

fn validate_spectrum(s: &SpectrumConfig) -> Result<(), CliError> {
    check("spectrum.start_nm", s.start_nm > 0.0, format!("must be positive, got {}", s.start_nm))?;
    check("spectrum.stop_nm", s.stop_nm > s.start_nm, "must exceed start_nm")?;
    check("spectrum.points", s.points >= 3, format!("need at least 3, got {}", s.points))?;
    check("spectrum.prominence_db", s.prominence_db > 0.0, "must be positive")
}

fn validate_figures(f: &FiguresConfig) -> Result<(), CliError> {
    check("figures.t1_sq_points", f.t1_sq_points >= 2, "need at least 2")?;
    check("figures.ring_loss_db", f.ring_loss_db >= 0.0, "must be non-negative")?;
    check("figures.pump_wavelength_nm", f.pump_wavelength_nm > 0.0, "must be positive")?;
    if let Some(gaps) = &f.gaps_nm {
        check("figures.gaps_nm", !gaps.is_empty() && gaps.iter().all(|g| *g > 0.0), "must be positive gaps")?;
    }
    Ok(())
}

fn validate_coinc(c: &CoincConfig) -> Result<(), CliError> {
    for (name, v) in [
        ("pair_rate_ring_hz", c.pair_rate_ring_hz),
        ("pair_rate_bus_background_hz", c.pair_rate_bus_background_hz),
        ("dark_count_rate_hz", c.dark_count_rate_hz),
        ("timing_jitter_ps", c.timing_jitter_ps),
        ("integration_time_s", c.integration_time_s),
    ] {
        check(&format!("coinc.{name}"), v >= 0.0 && v.is_finite(), format!("must be non-negative, got {v}"))?;
    }
    for (name, v) in [("p_drop", c.p_drop), ("p_thru", c.p_thru)] {
        if let Some(v) = v {
            check(&format!("coinc.{name}"), (0.0..=1.0).contains(&v), format!("must lie in [0, 1], got {v}"))?;
        }
    }
    for (i, e) in c.path_efficiencies.iter().enumerate() {
        check(&format!("coinc.path_efficiencies[{i}]"), *e > 0.0 && *e <= 1.0, format!("must lie in (0, 1], got {e}"))?;
    }
    check("coinc.detector_efficiency", (0.0..=1.0).contains(&c.detector_efficiency), "must lie in [0, 1]")?;
    check("coinc.bin_width_ps", c.bin_width_ps > 0.0, "must be positive")?;
    check("coinc.span_ns", c.span_ns * 1e3 >= c.bin_width_ps, "must cover at least one bin")?;
    check("coinc.peak_window_ps", c.peak_window_ps >= c.bin_width_ps, "must be at least one bin wide")?;
    check("coinc.pump_wavelength_nm", c.pump_wavelength_nm > 0.0, "must be positive")
}

fn validate_tune(t: &TuneConfig) -> Result<(), CliError> {
    check("tune.steps_per_axis", t.steps_per_axis >= 2, "need at least 2")?;
    check("tune.tolerance_rad", t.tolerance_rad > 0.0, "must be positive")?;
    check("tune.weights", t.weights.iter().all(|w| *w >= 0.0), "must be non-negative")?;
    check("tune.weights", t.weights.iter().any(|w| *w > 0.0), "must not all be zero")?;
    check("tune.ceiling_db", t.ceiling_db > 0.0, "must be positive")?;
    check("tune.max_voltage_v", t.max_voltage_v > 0.0, "must be positive")?;
    if let Some(c) = t.phase_per_volt_sq {
        check("tune.phase_per_volt_sq", c.iter().all(|x| *x >= 0.0), "must be non-negative")?;
    }
    if let Some(v) = t.start_voltages_v {
        check(
            "tune.start_voltages_v",
            v.iter().all(|x| (0.0..=t.max_voltage_v).contains(x)),
            format!("must lie in [0, {}]", t.max_voltage_v),
        )?;
    }
    check("tune.spectrum_span_nm", t.spectrum_span_nm > 0.0, "must be positive")?;
    check("tune.spectrum_points", t.spectrum_points >= 3, "need at least 3")
}

/// Merge a config file over a preset and validate every section.
pub fn resolve(file: Option<RunConfig>, preset: Option<Preset>) -> Result<Resolved, CliError> {
    let file = file.unwrap_or_default();
    let gap_map = match &file.gap_map {
        Some(g) => GapCouplingMap::new(g.kappa0, g.decay_length_nm * 1e-9).map_err(|e| invalid("gap_map", e))?,
        None => presets::default_gap_map(),
    };
    let mut device = match (&file.device, preset) {
        (Some(d), _) => device(d, &gap_map)?,
        (None, Some(p)) => p.device().map_err(|e| invalid("--preset", e))?,
        (None, None) => return Err(CliError::Config("device: missing; give [device] or --preset".into())),
    };
    if let Some(p) = file.heater_phases_rad {
        check("heater_phases_rad", p.iter().all(|x| x.is_finite()), "must be finite")?;
        device = device.with_phases(p);
    }
    let figures = file
        .figures
        .clone()
        .unwrap_or_else(|| preset.map(|p| p.figures()).unwrap_or_default());
    let resolved = Resolved {
        device,
        gap_map,
        spectrum: file.spectrum.unwrap_or_default(),
        figures,
        coinc: file.coinc.unwrap_or_default(),
        tune: file.tune.unwrap_or_default(),
    };
    validate_spectrum(&resolved.spectrum)?;
    validate_figures(&resolved.figures)?;
    validate_coinc(&resolved.coinc)?;
    validate_tune(&resolved.tune)?;
    Ok(resolved)
}
