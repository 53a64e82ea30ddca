//! Heater tuning of a ring with MZI couplers.
//!
//! The objective rewards three features of the operating point: the pump is
//! extinguished at the through port (critical coupling on the input side),
//! the pump is blocked from the drop port, and signal/idler photons leave
//! through the drop port. Each feature is measured in dB and clamped to a
//! ceiling so lossless models cannot produce unbounded scores.

use crate::error::{Error, Result};
use crate::model::{Coupler, DeviceSpec, HeaterPhases};
use crate::pair;
use crate::transfer::{self, Excitation, RingLoop};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Quadratic voltage-to-phase law, one coefficient per heater
/// (ring, input MZI, output MZI).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeaterModel {
    pub phase_per_volt_sq: [f64; 3],
    pub max_voltage: f64,
}

impl HeaterModel {
    pub fn new(phase_per_volt_sq: [f64; 3], max_voltage: f64) -> Result<Self> {
        if phase_per_volt_sq.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::Config(format!(
                "heater coefficients must be non-negative, got {phase_per_volt_sq:?}"
            )));
        }
        if !(max_voltage > 0.0 && max_voltage.is_finite()) {
            return Err(Error::Config(format!("max_voltage must be positive, got {max_voltage}")));
        }
        Ok(Self {
            phase_per_volt_sq,
            max_voltage,
        })
    }

    /// Every heater reaches 1.05·2π at `max_voltage`, so a sweep from zero
    /// covers a full period.
    pub fn full_period(max_voltage: f64) -> Result<Self> {
        let c = 2.0 * PI * 1.05 / (max_voltage * max_voltage);
        Self::new([c; 3], max_voltage)
    }

    pub fn phases(&self, voltages: [f64; 3]) -> HeaterPhases {
        std::array::from_fn(|i| self.phase_per_volt_sq[i] * voltages[i] * voltages[i])
    }

    /// Inverse of [`HeaterModel::phases`] on `[0, max_voltage]`.
    pub fn voltages(&self, phases: HeaterPhases) -> [f64; 3] {
        std::array::from_fn(|i| {
            let c = self.phase_per_volt_sq[i];
            if c > 0.0 {
                (phases[i].max(0.0) / c).sqrt().min(self.max_voltage)
            } else {
                0.0
            }
        })
    }

    /// Largest reachable phase per heater.
    pub fn phase_limits(&self) -> [f64; 3] {
        self.phases([self.max_voltage; 3])
    }
}

impl Default for HeaterModel {
    fn default() -> Self {
        Self::full_period(10.0).expect("valid default")
    }
}

/// Where the pump, signal and idler sit while a configuration is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PumpPlacement {
    /// Fixed laser and photon wavelengths.
    Fixed { pump: f64, signal: f64, idler: f64 },
    /// The pump follows the resonance nearest `near`; signal and idler are the
    /// adjacent longitudinal modes.
    TrackResonance { near: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningObjective {
    /// (pump through extinction, pump drop suppression, signal/idler drop extraction).
    pub weights: [f64; 3],
    pub placement: PumpPlacement,
    /// Each dB term is clamped to ±ceiling before weighting.
    pub ceiling_db: f64,
}

impl TuningObjective {
    pub const DEFAULT_WEIGHTS: [f64; 3] = [1.0, 0.5, 10.0];

    pub fn new(weights: [f64; 3], placement: PumpPlacement) -> Result<Self> {
        let o = Self {
            weights,
            placement,
            ceiling_db: 60.0,
        };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::Precondition(format!(
                "objective weights must be non-negative, got {:?}",
                self.weights
            )));
        }
        if self.weights.iter().all(|w| *w == 0.0) {
            return Err(Error::Precondition("objective weights are all zero".into()));
        }
        if !(self.ceiling_db > 0.0) {
            return Err(Error::Precondition(format!("ceiling must be positive, got {}", self.ceiling_db)));
        }
        Ok(())
    }
}

/// Per-term figures in dB, before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    /// −10·log10 of the through-port transmission at the pump.
    pub pump_extinction_db: f64,
    /// −10·log10 of the drop-port transmission at the pump.
    pub pump_drop_suppression_db: f64,
    /// Mean of 10·log10(drop-port exit probability) for signal and idler.
    pub signal_idler_extraction_db: f64,
    pub pump_wavelength: f64,
    pub signal_wavelength: f64,
    pub idler_wavelength: f64,
}

impl Diagnostics {
    pub fn terms(&self) -> [f64; 3] {
        [
            self.pump_extinction_db,
            self.pump_drop_suppression_db,
            self.signal_idler_extraction_db,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningResult {
    pub voltages: [f64; 3],
    pub phases: HeaterPhases,
    pub objective_value: f64,
    pub diagnostics: Diagnostics,
}

fn clamp_db(value: f64, ceiling: f64) -> f64 {
    if value.is_nan() {
        -ceiling
    } else {
        value.clamp(-ceiling, ceiling)
    }
}

/// Pump, signal and idler wavelengths for `device` (phases already applied).
pub fn placement_wavelengths(device: &DeviceSpec, placement: &PumpPlacement) -> Result<(f64, f64, f64)> {
    match *placement {
        PumpPlacement::Fixed { pump, signal, idler } => Ok((pump, signal, idler)),
        PumpPlacement::TrackResonance { near } => {
            let (m, pump) = transfer::resonance_near(device, near)?;
            // Higher mode number = shorter wavelength = signal.
            Ok((pump, transfer::mode_resonance(device, m + 1)?, transfer::mode_resonance(device, m - 1)?))
        }
    }
}

/// Weighted objective at `phases` and its per-term diagnostics.
pub fn evaluate_objective(
    device: &DeviceSpec,
    phases: HeaterPhases,
    objective: &TuningObjective,
) -> Result<(f64, Diagnostics)> {
    objective.validate()?;
    let d = device.with_phases(phases);
    let (pump, signal, idler) = placement_wavelengths(&d, &objective.placement)?;

    let r = RingLoop::at(&d, pump).respond(Excitation::Input);
    let ceiling = objective.ceiling_db;
    let extinction = clamp_db(-10.0 * r.through.norm_sqr().log10(), ceiling);
    let suppression = clamp_db(-10.0 * r.drop.norm_sqr().log10(), ceiling);

    let mut extraction = 0.0;
    for lam in [signal, idler] {
        // A photon mode decoupled from both buses never leaves by the drop port.
        let p_drop = match pair::device_routing(&d, lam, true) {
            Ok(routing) => routing.p_drop,
            Err(Error::Degenerate(_)) => 0.0,
            Err(e) => return Err(e),
        };
        extraction += clamp_db(10.0 * p_drop.log10(), ceiling) / 2.0;
    }

    let diagnostics = Diagnostics {
        pump_extinction_db: extinction,
        pump_drop_suppression_db: suppression,
        signal_idler_extraction_db: extraction,
        pump_wavelength: pump,
        signal_wavelength: signal,
        idler_wavelength: idler,
    };
    let value = diagnostics
        .terms()
        .iter()
        .zip(objective.weights)
        .map(|(t, w)| t * w)
        .sum();
    Ok((value, diagnostics))
}

fn result_at(
    device: &DeviceSpec,
    heater: &HeaterModel,
    objective: &TuningObjective,
    phases: HeaterPhases,
) -> Result<TuningResult> {
    let (objective_value, diagnostics) = evaluate_objective(device, phases, objective)?;
    Ok(TuningResult {
        voltages: heater.voltages(phases),
        phases,
        objective_value,
        diagnostics,
    })
}

/// Score of the heaters-off configuration.
pub fn untuned(device: &DeviceSpec, heater: &HeaterModel, objective: &TuningObjective) -> Result<TuningResult> {
    result_at(device, heater, objective, heater.phases([0.0; 3]))
}

/// Exhaustive sweep of `steps_per_axis` voltages per heater from 0 to the
/// maximum. Ties go to the lexicographically smallest voltage triple.
pub fn grid_sweep(
    device: &DeviceSpec,
    heater: &HeaterModel,
    objective: &TuningObjective,
    steps_per_axis: usize,
) -> Result<TuningResult> {
    objective.validate()?;
    if steps_per_axis < 2 {
        return Err(Error::Precondition(format!(
            "grid sweep needs at least 2 steps per axis, got {steps_per_axis}"
        )));
    }
    let n = steps_per_axis;
    let volt = |k: usize| heater.max_voltage * k as f64 / (n - 1) as f64;
    let triple = |idx: usize| [volt(idx / (n * n)), volt((idx / n) % n), volt(idx % n)];
    let scores: Vec<Result<f64>> = (0..n * n * n)
        .into_par_iter()
        .map(|idx| evaluate_objective(device, heater.phases(triple(idx)), objective).map(|(v, _)| v))
        .collect();

    // Index order is lexicographic in voltages, so a strict comparison keeps
    // the smallest triple among equals.
    let mut best: Option<(usize, f64)> = None;
    for (idx, score) in scores.into_iter().enumerate() {
        let score = score?;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((idx, score));
        }
    }
    let (idx, _) = best.expect("grid is non-empty");
    let voltages = triple(idx);
    let mut result = result_at(device, heater, objective, heater.phases(voltages))?;
    result.voltages = voltages;
    Ok(result)
}

fn golden_section_max(lo: f64, hi: f64, tolerance: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a >= tolerance {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let x = 0.5 * (a + b);
    Ok((x, f(x)?))
}

const MAX_REFINE_CYCLES: usize = 500;

/// [`refine`] that also returns the accepted objective value after each cycle.
pub fn refine_traced(
    device: &DeviceSpec,
    heater: &HeaterModel,
    objective: &TuningObjective,
    start: &TuningResult,
    tolerance: f64,
) -> Result<(TuningResult, Vec<f64>)> {
    if !(tolerance > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tolerance}")));
    }
    let limits = heater.phase_limits();
    if start
        .voltages
        .iter()
        .any(|v| !(*v >= 0.0 && *v <= heater.max_voltage * (1.0 + 1e-12)))
    {
        return Err(Error::Precondition(format!(
            "start voltages {:?} outside [0, {}]",
            start.voltages, heater.max_voltage
        )));
    }
    let mut x = start.phases;
    let (mut fx, _) = evaluate_objective(device, x, objective)?;
    let mut trace = vec![fx];
    let mut step = [0.25f64; 3];

    for _ in 0..MAX_REFINE_CYCLES {
        let mut largest = 0.0f64;
        for axis in 0..3 {
            if limits[axis] <= 0.0 {
                continue;
            }
            let lo = (x[axis] - step[axis]).max(0.0);
            let hi = (x[axis] + step[axis]).min(limits[axis]);
            let (cand, fc) = golden_section_max(lo, hi, tolerance, |p| {
                let mut y = x;
                y[axis] = p;
                evaluate_objective(device, y, objective).map(|(v, _)| v)
            })?;
            let moved = (cand - x[axis]).abs();
            if fc > fx {
                x[axis] = cand;
                fx = fc;
                largest = largest.max(moved);
                if moved > 0.5 * step[axis] {
                    step[axis] = (2.0 * step[axis]).min(limits[axis]);
                }
            } else {
                step[axis] = (0.5 * step[axis]).max(tolerance);
            }
        }
        trace.push(fx);
        // Stop once nothing moves and every bracket has shrunk to the tolerance.
        if largest < tolerance && step.iter().all(|h| *h <= tolerance) {
            break;
        }
    }
    if fx <= start.objective_value {
        return Ok((*start, trace));
    }
    Ok((result_at(device, heater, objective, x)?, trace))
}

/// Cyclic coordinate descent from `start`, one golden-section line search per
/// phase, until no phase moves by more than `tolerance` radians. Never returns
/// a worse objective than `start`.
pub fn refine(
    device: &DeviceSpec,
    heater: &HeaterModel,
    objective: &TuningObjective,
    start: &TuningResult,
    tolerance: f64,
) -> Result<TuningResult> {
    refine_traced(device, heater, objective, start, tolerance).map(|(r, _)| r)
}

/// Target state of the two MZI couplers at the aligned resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alignment {
    /// Both MZIs in the cross state: the aligned resonance couples to both buses.
    InPhase,
    /// Input MZI cross, output MZI bar: the pump couples in but not out.
    Complementary,
}

fn mzi_heater(coupler: &Coupler, device: &DeviceSpec, wavelength: f64, target: f64) -> f64 {
    match coupler {
        Coupler::Point(_) => 0.0,
        Coupler::Mzi(m) => {
            let beta = device.waveguide.beta(wavelength);
            let delta = beta * (m.bus_arm_length - m.ring_arm_length) + m.phase_bias;
            (target - delta).rem_euclid(2.0 * PI)
        }
    }
}

/// Heater phases that put a resonance exactly at `wavelength` with the MZIs
/// in the requested state there.
pub fn ideal_phases(device: &DeviceSpec, wavelength: f64, alignment: Alignment) -> Result<HeaterPhases> {
    if !(wavelength > 0.0) {
        return Err(Error::Domain(format!("wavelength must be positive, got {wavelength}")));
    }
    let h1 = mzi_heater(&device.input_coupler, device, wavelength, 0.0);
    let h2 = mzi_heater(
        &device.output_coupler,
        device,
        wavelength,
        match alignment {
            Alignment::InPhase => 0.0,
            Alignment::Complementary => PI,
        },
    );
    let d = device.with_phases([0.0, h1, h2]);
    let g = RingLoop::at(&d, wavelength).loop_gain();
    let loop_phase = if g.norm() > 1e-12 {
        g.arg()
    } else {
        transfer::round_trip_phase(&d, wavelength)
    };
    Ok([(-loop_phase).rem_euclid(2.0 * PI), h1, h2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{MziCouplerSpec, PointCoupler, RingGeometry, WaveguideModel};

    fn dmzr(k: f64, loss: f64) -> DeviceSpec {
        let c = PointCoupler::from_power_coupling(k).unwrap();
        let l = 2.0 * PI * 15e-6;
        let mzi = MziCouplerSpec::new(c, c, 20e-6 + l / 2.0, 20e-6).unwrap();
        DeviceSpec::new(
            RingGeometry::new(15e-6).unwrap(),
            WaveguideModel::silicon_strip(loss).unwrap(),
            mzi,
            mzi,
        )
        .unwrap()
    }

    fn tracking(weights: [f64; 3]) -> TuningObjective {
        TuningObjective::new(weights, PumpPlacement::TrackResonance { near: 1550e-9 }).unwrap()
    }

    #[test]
    fn heater_law() {
        let h = HeaterModel::default();
        assert_eq!(h.phases([0.0; 3]), [0.0; 3]);
        assert!((h.phase_limits()[0] - 2.1 * PI).abs() < 1e-12);
        let v = [1.0, 9.0, 7.0];
        let back = h.voltages(h.phases(v));
        for i in 0..3 {
            assert!((back[i] - v[i]).abs() < 1e-12);
        }
        assert!(HeaterModel::new([-1.0, 0.0, 0.0], 10.0).is_err());
    }

    #[test]
    fn zero_weights_rejected() {
        let err = TuningObjective::new([0.0; 3], PumpPlacement::TrackResonance { near: 1550e-9 });
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn untuned_smoke() {
        let d = dmzr(0.1, 0.0);
        let (v, diag) = evaluate_objective(&d, [0.0; 3], &tracking([1.0, 1.0, 1.0])).unwrap();
        assert!(v.is_finite());
        assert!(diag.terms().iter().all(|t| t.is_finite()));
    }

    #[test]
    fn objective_is_periodic_in_each_phase() {
        let d = dmzr(0.1, 300.0);
        let o = tracking([1.0, 0.5, 10.0]);
        let p = [0.7, 1.9, 4.1];
        let (base, _) = evaluate_objective(&d, p, &o).unwrap();
        for axis in 0..3 {
            let mut q = p;
            q[axis] += 2.0 * PI;
            let (shifted, _) = evaluate_objective(&d, q, &o).unwrap();
            assert!((shifted - base).abs() < 1e-9, "axis {axis}: {shifted} vs {base}");
        }
    }

    #[test]
    fn ideal_phases_put_resonance_on_target() {
        let d = dmzr(0.1, 300.0);
        let target = 1551.3e-9;
        for alignment in [Alignment::InPhase, Alignment::Complementary] {
            let p = ideal_phases(&d, target, alignment).unwrap();
            let tuned = d.with_phases(p);
            let g = RingLoop::at(&tuned, target).loop_gain();
            assert!(g.arg().abs() < 1e-9);
            let (_, res) = transfer::resonance_near(&tuned, target).unwrap();
            assert!((res - target).abs() < 1e-15);
        }
    }

    #[test]
    fn ideal_operating_point_suppresses_pump_at_drop() {
        let d = dmzr(0.1, 0.0);
        let p = ideal_phases(&d, 1550e-9, Alignment::Complementary).unwrap();
        let (_, diag) = evaluate_objective(&d, p, &tracking([1.0, 1.0, 1.0])).unwrap();
        assert!(diag.pump_drop_suppression_db >= 30.0, "{diag:?}");
        assert!(diag.signal_idler_extraction_db > -0.1, "{diag:?}");
    }

    #[test]
    fn point_ring_grid_aligns_resonance_to_pump() {
        let c = PointCoupler::from_power_coupling(0.05).unwrap();
        let d = DeviceSpec::new(
            RingGeometry::new(15e-6).unwrap(),
            WaveguideModel::silicon_strip(0.0).unwrap(),
            c,
            c,
        )
        .unwrap();
        let pump = 1550.4e-9;
        let o = TuningObjective::new(
            [1.0, 0.0, 0.0],
            PumpPlacement::Fixed {
                pump,
                signal: pump - 5e-9,
                idler: pump + 5e-9,
            },
        )
        .unwrap();
        let h = HeaterModel::default();
        let coarse = grid_sweep(&d, &h, &o, 21).unwrap();
        let fine = refine(&d, &h, &o, &coarse, 1e-6).unwrap();
        assert!(fine.objective_value >= coarse.objective_value);
        let tuned = d.with_phases(fine.phases);
        let (_, res) = transfer::resonance_near(&tuned, pump).unwrap();
        let width = transfer::linewidth(&tuned, res);
        assert!((res - pump).abs() < 0.05 * width, "{res} vs {pump}, width {width}");
        // Heaters without an MZI stay at the first grid value.
        assert_eq!(coarse.voltages[1], 0.0);
        assert_eq!(coarse.voltages[2], 0.0);
    }

    #[test]
    fn refine_never_worsens_and_fixed_point_holds() {
        let d = dmzr(0.1, 300.0);
        let o = tracking([1.0, 0.5, 10.0]);
        let h = HeaterModel::default();
        let start = result_at(&d, &h, &o, [1.0, 2.0, 3.0]).unwrap();
        let (r, trace) = refine_traced(&d, &h, &o, &start, 1e-5).unwrap();
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        assert!(r.objective_value >= start.objective_value);
        let again = refine(&d, &h, &o, &r, 1e-5).unwrap();
        assert!(again.objective_value >= r.objective_value);
    }

    fn lossy_point_ring() -> DeviceSpec {
        let c = PointCoupler::from_power_coupling(0.05).unwrap();
        let weak = PointCoupler::from_power_coupling(0.01).unwrap();
        DeviceSpec::new(
            RingGeometry::new(15e-6).unwrap(),
            WaveguideModel::silicon_strip(2000.0).unwrap(),
            c,
            weak,
        )
        .unwrap()
    }

    #[test]
    fn refine_from_one_cell_off_matches_dense_scan() {
        let d = lossy_point_ring();
        let pump = 1550.4e-9;
        let o = TuningObjective::new(
            [1.0, 0.0, 0.0],
            PumpPlacement::Fixed {
                pump,
                signal: pump - 5e-9,
                idler: pump + 5e-9,
            },
        )
        .unwrap();
        let h = HeaterModel::default();
        let limit = h.phase_limits()[0];
        let n = 200_000;
        let (mut best_phase, mut best) = (0.0, f64::NEG_INFINITY);
        for i in 0..=n {
            let p = limit * i as f64 / n as f64;
            let (v, _) = evaluate_objective(&d, [p, 0.0, 0.0], &o).unwrap();
            if v > best {
                best = v;
                best_phase = p;
            }
        }
        let cell = limit / 10.0;
        let start_phase = if best_phase + cell <= limit { best_phase + cell } else { best_phase - cell };
        let start = result_at(&d, &h, &o, [start_phase, 0.0, 0.0]).unwrap();
        let tol = 1e-6;
        let r = refine(&d, &h, &o, &start, tol).unwrap();
        assert!((r.phases[0] - best_phase).abs() < limit / n as f64 + 10.0 * tol, "{} vs {best_phase}", r.phases[0]);
        assert!(r.objective_value >= best - 1e-9);

        let again = refine(&d, &h, &o, &r, tol).unwrap();
        assert!((again.phases[0] - r.phases[0]).abs() < 10.0 * tol);
        assert!((again.objective_value - r.objective_value).abs() < 1e-9);
    }

    #[test]
    fn coarse_tolerance_keeps_start() {
        let d = dmzr(0.1, 300.0);
        let o = tracking([1.0, 0.5, 10.0]);
        let h = HeaterModel::default();
        let start = result_at(&d, &h, &o, [2.0, 2.0, 2.0]).unwrap();
        let r = refine(&d, &h, &o, &start, 10.0).unwrap();
        for i in 0..3 {
            assert!((r.phases[i] - start.phases[i]).abs() <= 0.25 + 1e-12);
        }
    }

    #[test]
    fn sweep_rejects_single_step() {
        let d = dmzr(0.1, 0.0);
        let o = tracking([1.0, 0.0, 0.0]);
        assert!(matches!(grid_sweep(&d, &HeaterModel::default(), &o, 1), Err(Error::Precondition(_))));
    }
}
