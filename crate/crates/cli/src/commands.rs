//! The four subcommands. Each computes first and then writes its files in a
//! fixed order.

use crate::config::Resolved;
use crate::output::{Cell, Output};
use crate::{CliError, Command};
use ringsource::coincidence::{
    eta_from_counts, extract_counts, off_resonance_control, path_swap_calibration, simulate, ChannelPair,
    CoincidenceCounts, ExperimentConfig, Histograms,
};
use ringsource::model::{Coupler, DeviceSpec, PointCoupler, WavelengthGrid};
use ringsource::pair::{self, Routing};
use ringsource::spectrum::{find_resonances, ResonanceList};
use ringsource::transfer::{self, device_spectrum, ComplexSpectrum, Excitation};
use ringsource::tuning::{self, HeaterModel, PumpPlacement, TuningObjective, TuningResult};
use serde_json::{json, Value};

pub fn dispatch(command: Command, r: &Resolved, out: &mut Output) -> Result<(), CliError> {
    match command {
        Command::Spectrum => spectrum(r, out),
        Command::Figures => figures(r, out),
        Command::Coinc => coinc(r, out),
        Command::Tune => tune(r, out),
    }
}

fn nm(x: f64) -> f64 {
    x * 1e9
}

fn coupler_summary(c: &Coupler) -> Value {
    match c {
        Coupler::Point(p) => json!({ "kind": "point", "kappa_sq": p.kappa_sq() }),
        Coupler::Mzi(m) => json!({
            "kind": "mzi",
            "sub_coupler_a_kappa_sq": m.sub_coupler_a.kappa_sq(),
            "sub_coupler_b_kappa_sq": m.sub_coupler_b.kappa_sq(),
            "bus_arm_um": m.bus_arm_length * 1e6,
            "ring_arm_um": m.ring_arm_length * 1e6,
            "heater_phase_rad": m.tunable_phase,
            "phase_bias_rad": m.phase_bias,
        }),
    }
}

fn device_summary(d: &DeviceSpec) -> Value {
    json!({
        "radius_um": d.geometry.radius * 1e6,
        "loss_db_per_cm": d.waveguide.propagation_loss / 100.0,
        "round_trip_amplitude": d.round_trip_amplitude(),
        "heater_phases_rad": d.phases(),
        "input_coupler": coupler_summary(&d.input_coupler),
        "output_coupler": coupler_summary(&d.output_coupler),
    })
}

fn port_name(e: Excitation) -> &'static str {
    match e {
        Excitation::Input => "input",
        Excitation::Add => "add",
    }
}

fn write_spectrum(out: &mut Output, name: &str, s: &ComplexSpectrum) -> Result<(), CliError> {
    let rows = (0..s.len()).map(|i| {
        let (t, d) = (s.through_amplitude[i], s.drop_amplitude[i]);
        vec![
            Cell::Num(nm(s.grid.wavelength(i))),
            Cell::Num(10.0 * t.norm_sqr().max(1e-30).log10()),
            Cell::Num(10.0 * d.norm_sqr().max(1e-30).log10()),
            Cell::Num(t.arg()),
            Cell::Num(d.arg()),
        ]
    });
    out.csv(
        name,
        &["wavelength_nm", "thru_power_db", "drop_power_db", "thru_phase_rad", "drop_phase_rad"],
        rows,
    )
}

fn resonance_table(list: &ResonanceList) -> Value {
    Value::Array(
        list.entries
            .iter()
            .map(|r| {
                json!({
                    "wavelength_nm": nm(r.wavelength),
                    "extinction_db": r.depth_db,
                    "coupled_power_db": r.coupled_power_db,
                    "linewidth_pm": r.linewidth.map(|w| w * 1e12),
                    "resolved": r.resolved,
                    "suppressed": r.suppressed,
                })
            })
            .collect(),
    )
}

/// Spectra for both excitations on `grid`, written as `<prefix>_<port>.csv`,
/// with the resonance tables keyed by port.
fn spectra_with_tables(
    device: &DeviceSpec,
    grid: &WavelengthGrid,
    prominence_db: f64,
    prefix: &str,
    out: &mut Output,
) -> Result<Value, CliError> {
    let mut tables = serde_json::Map::new();
    for excitation in [Excitation::Input, Excitation::Add] {
        let s = device_spectrum(device, grid, excitation)?;
        let list = find_resonances(&s, prominence_db)?;
        write_spectrum(out, &format!("{prefix}_{}.csv", port_name(excitation)), &s)?;
        let flags: String = list.entries.iter().map(|r| if r.suppressed { 'S' } else { 'o' }).collect();
        out.say(format!(
            "{prefix} {:>5}: {} resonances  [{}]",
            port_name(excitation),
            list.len(),
            flags
        ));
        tables.insert(port_name(excitation).into(), resonance_table(&list));
    }
    Ok(Value::Object(tables))
}

fn spectrum(r: &Resolved, out: &mut Output) -> Result<(), CliError> {
    let s = &r.spectrum;
    let grid = WavelengthGrid::new(s.start_nm * 1e-9, s.stop_nm * 1e-9, s.points)?;
    let center = 0.5 * (grid.start + grid.stop);
    let fsr = r.device.fsr_at(center)?;
    out.say(format!("FSR at {:.3} nm: {:.4} nm", nm(center), nm(fsr)));
    let tables = spectra_with_tables(&r.device, &grid, s.prominence_db, "spectrum", out)?;
    out.json(
        "spectrum_summary.json",
        &json!({
            "device": device_summary(&r.device),
            "grid": { "start_nm": s.start_nm, "stop_nm": s.stop_nm, "points": s.points },
            "prominence_db": s.prominence_db,
            "fsr_nm": nm(fsr),
            "resonances": tables,
        }),
    )
}

fn figures_json(f: &pair::PairSourceFigures) -> Value {
    json!({
        "p_drop": f.p_drop,
        "p_thru": f.p_thru,
        "p_loss": f.p_loss,
        "eta_coinc": f.eta_coinc,
        "buildup_factor": f.buildup_factor,
        "relative_pump_power": f.relative_pump_power,
    })
}

fn figures(r: &Resolved, out: &mut Output) -> Result<(), CliError> {
    let f = &r.figures;
    let pump = f.pump_wavelength_nm * 1e-9;
    let (_, photon) = transfer::resonance_near(&r.device, pump)?;
    // Pump power is quoted against the same ring with both couplers equal to
    // the drop-side coupler.
    let reference = r.device.with_input_coupler(r.device.output_coupler)?;
    let mut warnings: Vec<String> = Vec::new();

    let own = pair::figures(&r.device, &reference, pump, photon, f.loss_aware)?;
    if own.p_drop == 0.0 {
        warnings.push("drop coupler is decoupled: no photons reach the drop port, eta_coinc = 0".into());
    }
    out.say(format!(
        "device: eta_coinc = {:.4}, p_drop = {:.4}, relative pump power = {:.4}",
        own.eta_coinc, own.p_drop, own.relative_pump_power
    ));

    let (_, t2_sq) = pair::coupler_self_powers(&r.device, photon);
    let a_sq = 10f64.powf(-f.ring_loss_db / 10.0);
    let lower = t2_sq * a_sq;
    let curve = if lower < 1.0 - 1e-12 {
        let n = f.t1_sq_points;
        let sweep: Vec<f64> = (0..n).map(|i| lower + (1.0 - lower) * i as f64 / n as f64).collect();
        pair::theory_curve(t2_sq, f.ring_loss_db, &sweep)?
    } else {
        warnings.push("drop coupler has t2_sq = 1 at zero loss; theory curve is empty".into());
        Vec::new()
    };

    let mut family = Vec::new();
    if let Some(gaps) = &f.gaps_nm {
        for &gap in gaps {
            let input = PointCoupler::from_power_coupling(r.gap_map.kappa_sq(gap * 1e-9))?;
            let d = r.device.with_input_coupler(input)?;
            let fig = pair::figures(&d, &reference, pump, photon, f.loss_aware)?;
            family.push((gap, input.t_sq(), fig));
        }
    }
    for w in &warnings {
        out.say(format!("warning: {w}"));
    }

    out.csv(
        "theory_curve.csv",
        &["t1_sq", "relative_pump_power", "eta_coinc"],
        curve.iter().map(|p| vec![p.t1_sq.into(), p.relative_pump_power.into(), p.eta_coinc.into()]),
    )?;
    if !family.is_empty() {
        out.csv(
            "gap_family.csv",
            &["gap_nm", "t1_sq", "relative_pump_power", "eta_coinc", "p_drop"],
            family.iter().map(|(gap, t1, fig)| {
                vec![
                    (*gap).into(),
                    (*t1).into(),
                    fig.relative_pump_power.into(),
                    fig.eta_coinc.into(),
                    fig.p_drop.into(),
                ]
            }),
        )?;
        for (gap, _, fig) in &family {
            out.say(format!(
                "gap {gap:>6.1} nm: eta_coinc = {:.4}, relative pump power = {:.3}",
                fig.eta_coinc, fig.relative_pump_power
            ));
        }
    }
    let family_json: Vec<Value> = family
        .iter()
        .map(|(gap, t1, fig)| {
            json!({
                "gap_nm": gap,
                "t1_sq": t1,
                "figures": figures_json(fig),
                "curve_eta_at_same_pump": pair::eta_at_pump_power(&curve, fig.relative_pump_power),
            })
        })
        .collect();
    out.json(
        "figures.json",
        &json!({
            "device": device_summary(&r.device),
            "pump_wavelength_nm": nm(pump),
            "photon_wavelength_nm": nm(photon),
            "loss_aware": f.loss_aware,
            "t2_sq": t2_sq,
            "ring_loss_db": f.ring_loss_db,
            "figures": figures_json(&own),
            "gap_map": { "kappa0": r.gap_map.kappa0, "decay_length_nm": nm(r.gap_map.decay_length) },
            "gap_family": family_json,
            "warnings": warnings,
        }),
    )
}

/// Photon routing for the simulation. Without an override, signal and idler
/// are the modes adjacent to the pump resonance and the single routing used
/// for both photons is their geometric mean, which keeps the drop-drop and
/// thru-thru rates exact.
fn coinc_routing(r: &Resolved) -> Result<(Routing, Value), CliError> {
    let c = &r.coinc;
    if let Some(p_drop) = c.p_drop {
        let p_thru = c.p_thru.unwrap_or(1.0 - p_drop);
        if p_drop + p_thru > 1.0 + 1e-12 {
            return Err(CliError::Config(format!(
                "coinc.p_thru: p_drop + p_thru must not exceed 1, got {}",
                p_drop + p_thru
            )));
        }
        let routing = Routing {
            p_drop,
            p_thru,
            p_loss: (1.0 - p_drop - p_thru).max(0.0),
        };
        return Ok((routing, json!({ "source": "override" })));
    }
    let placement = PumpPlacement::TrackResonance {
        near: c.pump_wavelength_nm * 1e-9,
    };
    let (pump, signal, idler) = tuning::placement_wavelengths(&r.device, &placement)?;
    let s = pair::device_routing(&r.device, signal, c.loss_aware_routing)?;
    let i = pair::device_routing(&r.device, idler, c.loss_aware_routing)?;
    let p_drop = (s.p_drop * i.p_drop).sqrt();
    let p_thru = (s.p_thru * i.p_thru).sqrt();
    let routing = Routing {
        p_drop,
        p_thru,
        p_loss: (1.0 - p_drop - p_thru).max(0.0),
    };
    let info = json!({
        "source": "device",
        "pump_wavelength_nm": nm(pump),
        "signal_wavelength_nm": nm(signal),
        "idler_wavelength_nm": nm(idler),
        "signal_p_drop": s.p_drop,
        "idler_p_drop": i.p_drop,
    });
    Ok((routing, info))
}

fn write_histograms(out: &mut Output, suffix: &str, h: &Histograms) -> Result<(), CliError> {
    for pair in ChannelPair::ALL {
        let hist = h.get(pair);
        let rows = (0..hist.counts.len()).map(|k| vec![Cell::Num(hist.bin_center(k) * 1e9), Cell::Int(hist.counts[k])]);
        out.csv(&format!("hist_{}{suffix}.csv", pair.label()), &["bin_center_ns", "counts"], rows)?;
    }
    Ok(())
}

fn counts_json(c: &CoincidenceCounts) -> Value {
    let per = |f: &dyn Fn(ChannelPair) -> Value| -> Value {
        let mut m = serde_json::Map::new();
        for pair in ChannelPair::ALL {
            m.insert(pair.label().into(), f(pair));
        }
        Value::Object(m)
    };
    json!({
        "counts": per(&|p| json!(c.counts.get(p))),
        "variances": per(&|p| json!(c.variances.get(p))),
        "raw_peaks": per(&|p| json!(c.raw_peaks.get(p))),
        "accidentals": per(&|p| json!(c.accidental_estimates.get(p))),
        "significance": per(&|p| json!(c.significance(p))),
        "floored": per(&|p| json!(c.floored.get(p))),
    })
}

fn coinc(r: &Resolved, out: &mut Output) -> Result<(), CliError> {
    let c = &r.coinc;
    let (routing, routing_info) = coinc_routing(r)?;
    let config = ExperimentConfig {
        pair_rate_ring: c.pair_rate_ring_hz,
        pair_rate_bus_background: c.pair_rate_bus_background_hz,
        p_drop: routing.p_drop,
        p_thru: routing.p_thru,
        path_efficiencies: c.path_efficiencies,
        detector_efficiency: c.detector_efficiency,
        dark_count_rate: c.dark_count_rate_hz,
        timing_jitter_sigma: c.timing_jitter_ps * 1e-12,
        bin_width: c.bin_width_ps * 1e-12,
        span: c.span_ns * 1e-9,
        integration_time: c.integration_time_s,
        rng_seed: c.rng_seed,
    };
    config.validate()?;
    let window = c.peak_window_ps * 1e-12;

    let main = simulate(&config)?;
    let main_counts = extract_counts(&main, window)?;
    let mut seeds = serde_json::Map::new();
    seeds.insert("main".into(), json!(config.rng_seed));

    let swapped = if c.path_swap {
        let cfg = ExperimentConfig {
            rng_seed: config.rng_seed.wrapping_add(1),
            ..config.path_swapped()
        };
        seeds.insert("path_swapped".into(), json!(cfg.rng_seed));
        let h = simulate(&cfg)?;
        let counts = extract_counts(&h, window)?;
        Some((h, counts))
    } else {
        None
    };
    let off = if c.off_resonance_control {
        let cfg = ExperimentConfig {
            rng_seed: config.rng_seed.wrapping_add(2),
            ..config
        };
        seeds.insert("off_resonance".into(), json!(cfg.rng_seed));
        let h = off_resonance_control(&cfg)?;
        let counts = extract_counts(&h, window)?;
        Some((h, counts))
    } else {
        None
    };

    let raw_eta = eta_from_counts(&main_counts);
    let calibrated = swapped
        .as_ref()
        .map(|(_, b)| path_swap_calibration(&main_counts, b));
    let calibrated_eta = calibrated.as_ref().map(eta_from_counts);
    let reported = calibrated_eta.clone().unwrap_or_else(|| raw_eta.clone());

    let eta_json = |e: &ringsource::Result<ringsource::coincidence::EtaEstimate>| match e {
        Ok(e) => json!({ "eta": e.eta, "std_error": e.std_error }),
        Err(err) => json!({ "eta": null, "error": err.to_string() }),
    };

    write_histograms(out, "", &main)?;
    if let Some((h, _)) = &swapped {
        write_histograms(out, "_swapped", h)?;
    }
    if let Some((h, _)) = &off {
        write_histograms(out, "_off_resonance", h)?;
    }
    let mut summary = json!({
        "device": device_summary(&r.device),
        "routing": {
            "p_drop": routing.p_drop,
            "p_thru": routing.p_thru,
            "p_loss": routing.p_loss,
            "analytic_eta": routing.coincidence_ratio(),
            "detail": routing_info,
        },
        "seeds": seeds,
        "peak_window_ps": c.peak_window_ps,
        "main": counts_json(&main_counts),
        "eta_raw": eta_json(&raw_eta),
        "eta": eta_json(&reported),
    });
    if let Some(cal) = &calibrated {
        summary["path_swap_calibrated"] = counts_json(cal);
    }
    if let Some((_, counts)) = &off {
        summary["off_resonance"] = counts_json(counts);
    }
    out.json("coinc_summary.json", &summary)?;

    match reported {
        Ok(e) => {
            out.say(format!(
                "eta_coinc = {:.4} +/- {:.4} (analytic {:.4})",
                e.eta,
                e.std_error,
                routing.coincidence_ratio()
            ));
            if let Some((_, o)) = &off {
                for pair in ChannelPair::ALL {
                    out.say(format!("off-resonance {:>9}: {:.2} sigma", pair.label(), o.significance(pair)));
                }
            }
            Ok(())
        }
        Err(e) => Err(CliError::Runtime(format!("coincidence ratio undefined: {e}"))),
    }
}

fn result_json(t: &TuningResult, device: &DeviceSpec) -> Result<Value, CliError> {
    let d = device.with_phases(t.phases);
    let g = &t.diagnostics;
    let rate = pair::relative_drop_pair_rate(&d, g.pump_wavelength, g.signal_wavelength, g.idler_wavelength);
    let eta = |lam| pair::device_routing(&d, lam, false).map(|r| r.coincidence_ratio()).ok();
    Ok(json!({
        "voltages_v": t.voltages,
        "phases_rad": t.phases,
        "objective": t.objective_value,
        "pump_extinction_db": g.pump_extinction_db,
        "pump_drop_suppression_db": g.pump_drop_suppression_db,
        "signal_idler_extraction_db": g.signal_idler_extraction_db,
        "pump_wavelength_nm": nm(g.pump_wavelength),
        "signal_wavelength_nm": nm(g.signal_wavelength),
        "idler_wavelength_nm": nm(g.idler_wavelength),
        "relative_drop_pair_rate": rate.ok(),
        "signal_eta_coinc": eta(g.signal_wavelength),
        "idler_eta_coinc": eta(g.idler_wavelength),
    }))
}

fn tune(r: &Resolved, out: &mut Output) -> Result<(), CliError> {
    let t = &r.tune;
    let heater = match t.phase_per_volt_sq {
        Some(c) => HeaterModel::new(c, t.max_voltage_v)?,
        None => HeaterModel::full_period(t.max_voltage_v)?,
    };
    let mut objective = TuningObjective::new(
        t.weights,
        PumpPlacement::TrackResonance {
            near: t.pump_near_nm * 1e-9,
        },
    )?;
    objective.ceiling_db = t.ceiling_db;
    objective.validate()?;

    let before = tuning::untuned(&r.device, &heater, &objective)?;
    let start = match t.start_voltages_v {
        Some(v) => {
            let phases = heater.phases(v);
            let (objective_value, diagnostics) = tuning::evaluate_objective(&r.device, phases, &objective)?;
            TuningResult {
                voltages: v,
                phases,
                objective_value,
                diagnostics,
            }
        }
        None => tuning::grid_sweep(&r.device, &heater, &objective, t.steps_per_axis)?,
    };
    let after = if t.refine {
        tuning::refine(&r.device, &heater, &objective, &start, t.tolerance_rad)?
    } else {
        start
    };

    let span = t.spectrum_span_nm * 1e-9;
    let mut spectra = serde_json::Map::new();
    for (label, result) in [("before", &before), ("after", &after)] {
        let d = r.device.with_phases(result.phases);
        let grid = WavelengthGrid::centered(result.diagnostics.pump_wavelength, span, t.spectrum_points)?;
        let tables = spectra_with_tables(&d, &grid, 1.0, &format!("spectrum_{label}"), out)?;
        spectra.insert(label.into(), tables);
    }
    out.say(format!(
        "objective {:.3} -> {:.3}; pump extinction {:.2} -> {:.2} dB; drop suppression {:.2} -> {:.2} dB",
        before.objective_value,
        after.objective_value,
        before.diagnostics.pump_extinction_db,
        after.diagnostics.pump_extinction_db,
        before.diagnostics.pump_drop_suppression_db,
        after.diagnostics.pump_drop_suppression_db,
    ));
    out.say(format!(
        "heater voltages [{:.4}, {:.4}, {:.4}] V",
        after.voltages[0], after.voltages[1], after.voltages[2]
    ));
    out.json(
        "tuning.json",
        &json!({
            "device": device_summary(&r.device),
            "heater": { "phase_per_volt_sq": heater.phase_per_volt_sq, "max_voltage_v": heater.max_voltage },
            "objective": { "weights": objective.weights, "ceiling_db": objective.ceiling_db },
            "steps_per_axis": t.steps_per_axis,
            "refined": t.refine,
            "tolerance_rad": t.tolerance_rad,
            "untuned": result_json(&before, &r.device)?,
            "start": result_json(&start, &r.device)?,
            "tuned": result_json(&after, &r.device)?,
            "resonances": spectra,
        }),
    )
}
