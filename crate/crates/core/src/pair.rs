//! Photon-pair figures of merit: drop-port extraction, coincidence ratio,
//! pump buildup and the pump power needed relative to a reference device.
//!
//! The routing formulas treat the ring as lossless, so a photon generated
//! inside it leaves through one of the two couplers with probabilities set by
//! their power cross-couplings. [`routing_with_loss`] adds intracavity
//! scattering as a third outcome.

use crate::error::{Error, Result};
use crate::model::DeviceSpec;
use crate::transfer::{self, Excitation, RingLoop};

fn check_power(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {value}")));
    }
    Ok(())
}

/// Probability that a ring photon exits the drop port:
/// `(1 − t₂²) / (2 − t₁² − t₂²)`.
pub fn p_drop(t1_sq: f64, t2_sq: f64) -> Result<f64> {
    check_power("t1_sq", t1_sq)?;
    check_power("t2_sq", t2_sq)?;
    let (k1, k2) = (1.0 - t1_sq, 1.0 - t2_sq);
    if k1 + k2 <= 0.0 {
        return Err(Error::Degenerate(
            "both couplers have unit self-coupling; nothing leaves the ring".into(),
        ));
    }
    Ok(k2 / (k1 + k2))
}

/// Fraction of pairs with both photons at the drop port, `p_drop²`.
pub fn coincidence_ratio(t1_sq: f64, t2_sq: f64) -> Result<f64> {
    let p = p_drop(t1_sq, t2_sq)?;
    Ok(p * p)
}

/// Exit probabilities of a photon generated inside the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Routing {
    pub p_drop: f64,
    pub p_thru: f64,
    /// Probability of being scattered inside the ring. Zero in the lossless model.
    pub p_loss: f64,
}

impl Routing {
    pub fn lossless(t1_sq: f64, t2_sq: f64) -> Result<Self> {
        let p_drop = p_drop(t1_sq, t2_sq)?;
        Ok(Self {
            p_drop,
            p_thru: 1.0 - p_drop,
            p_loss: 0.0,
        })
    }

    /// Both photons at the drop port, normalised to detected pairs.
    pub fn coincidence_ratio(&self) -> f64 {
        let r = self.p_drop / (self.p_drop + self.p_thru);
        r * r
    }
}

/// Routing including intracavity loss, with per-round-trip power exit
/// channels `1 − t₁²`, `1 − t₂²` and `1 − a²`. Beyond the lossless
/// two-port idealisation; reduces to it for `round_trip_power = 1`.
pub fn routing_with_loss(t1_sq: f64, t2_sq: f64, round_trip_power: f64) -> Result<Routing> {
    check_power("t1_sq", t1_sq)?;
    check_power("t2_sq", t2_sq)?;
    check_power("round_trip_power", round_trip_power)?;
    let (k1, k2, l) = (1.0 - t1_sq, 1.0 - t2_sq, 1.0 - round_trip_power);
    let total = k1 + k2 + l;
    if k1 + k2 <= 0.0 {
        return Err(Error::Degenerate("no coupling to either bus".into()));
    }
    Ok(Routing {
        p_drop: k2 / total,
        p_thru: k1 / total,
        p_loss: l / total,
    })
}

/// Effective power self-couplings `(t₁², t₂²)` seen by a ring photon at
/// `wavelength`. For MZI couplers these come from the composite matrix.
pub fn coupler_self_powers(device: &DeviceSpec, wavelength: f64) -> (f64, f64) {
    let lp = RingLoop::at(device, wavelength);
    // Ring-to-bus cross term, so arm loss does not masquerade as coupling.
    let k1 = lp.input.m[0][1].norm_sqr().min(1.0);
    let k2 = lp.output.m[0][1].norm_sqr().min(1.0);
    (1.0 - k1, 1.0 - k2)
}

/// Routing of a photon generated at `wavelength` inside `device`.
pub fn device_routing(device: &DeviceSpec, wavelength: f64, with_loss: bool) -> Result<Routing> {
    let (t1_sq, t2_sq) = coupler_self_powers(device, wavelength);
    if with_loss {
        let a = device.round_trip_amplitude();
        routing_with_loss(t1_sq, t2_sq, a * a)
    } else {
        Routing::lossless(t1_sq, t2_sq)
    }
}

/// Circulating-to-input power ratio at `pump_wavelength` for light entering
/// the input port.
pub fn buildup_factor(device: &DeviceSpec, pump_wavelength: f64) -> f64 {
    transfer::response_at(device, pump_wavelength, Excitation::Input)
        .circulating
        .norm_sqr()
}

/// Peak buildup of the resonance nearest `near` and the wavelength where it
/// occurs.
pub fn peak_buildup(device: &DeviceSpec, near: f64) -> Result<(f64, f64)> {
    let (_, center) = transfer::resonance_near(device, near)?;
    let width = transfer::linewidth(device, center).max(center * 1e-12);
    // Coarse scan, then golden-section polish on the bracketing cell.
    let samples = 201;
    let (lo, hi) = (center - 2.0 * width, center + 2.0 * width);
    let step = (hi - lo) / (samples - 1) as f64;
    let mut best = (center, buildup_factor(device, center));
    for i in 0..samples {
        let lam = lo + step * i as f64;
        let b = buildup_factor(device, lam);
        if b > best.1 {
            best = (lam, b);
        }
    }
    let (mut a, mut b) = (best.0 - step, best.0 + step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    for _ in 0..60 {
        if buildup_factor(device, c) > buildup_factor(device, d) {
            b = d;
        } else {
            a = c;
        }
        c = b - inv_phi * (b - a);
        d = a + inv_phi * (b - a);
    }
    let mid = 0.5 * (a + b);
    let polished = buildup_factor(device, mid);
    if polished > best.1 {
        best = (mid, polished);
    }
    Ok(best)
}

/// Pump power `device` needs to reach the intracavity power of `reference`,
/// both pumped at their own resonance peak nearest `pump_wavelength`.
/// Returns `f64::INFINITY` when nothing couples into `device`.
pub fn relative_pump_power(device: &DeviceSpec, reference: &DeviceSpec, pump_wavelength: f64) -> Result<f64> {
    let (_, own) = peak_buildup(device, pump_wavelength)?;
    let (_, reference_buildup) = peak_buildup(reference, pump_wavelength)?;
    if own <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(reference_buildup / own)
}

/// On-resonance buildup of a point-coupled ring, `κ₁²/(1 − t₁t₂a)²`.
fn resonant_buildup(t1_sq: f64, t2_sq: f64, a: f64) -> f64 {
    let denom = 1.0 - t1_sq.sqrt() * t2_sq.sqrt() * a;
    (1.0 - t1_sq) / (denom * denom)
}

/// One point on the coincidence-ratio versus pump-power trade-off curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPoint {
    pub t1_sq: f64,
    pub relative_pump_power: f64,
    pub eta_coinc: f64,
}

/// Parametric curve over input self-coupling `t1_sq_sweep` with the drop
/// coupler fixed. Pump power is relative to the symmetric device (`t₁ = t₂`)
/// with the same round-trip loss.
pub fn theory_curve(t2_sq: f64, ring_loss_db: f64, t1_sq_sweep: &[f64]) -> Result<Vec<TheoryPoint>> {
    check_power("t2_sq", t2_sq)?;
    if !(ring_loss_db >= 0.0) {
        return Err(Error::Domain(format!("ring loss must be non-negative, got {ring_loss_db}")));
    }
    let a = 10f64.powf(-ring_loss_db / 20.0);
    let lower = t2_sq * a * a;
    let reference = resonant_buildup(t2_sq, t2_sq, a);
    t1_sq_sweep
        .iter()
        .map(|&t1_sq| {
            if !(t1_sq >= lower - 1e-15 && t1_sq < 1.0) {
                return Err(Error::Precondition(format!(
                    "t1_sq sweep value {t1_sq} outside [{lower}, 1)"
                )));
            }
            Ok(TheoryPoint {
                t1_sq,
                relative_pump_power: reference / resonant_buildup(t1_sq, t2_sq, a),
                eta_coinc: coincidence_ratio(t1_sq, t2_sq)?,
            })
        })
        .collect()
}

/// Linear interpolation of a theory curve at a given relative pump power.
/// `None` if the pump value lies outside the curve.
pub fn eta_at_pump_power(curve: &[TheoryPoint], pump: f64) -> Option<f64> {
    curve.windows(2).find_map(|w| {
        let (p0, p1) = (w[0].relative_pump_power, w[1].relative_pump_power);
        let (lo, hi) = if p0 <= p1 { (p0, p1) } else { (p1, p0) };
        if pump < lo || pump > hi {
            return None;
        }
        let frac = if p1 != p0 { (pump - p0) / (p1 - p0) } else { 0.0 };
        Some(w[0].eta_coinc + frac * (w[1].eta_coinc - w[0].eta_coinc))
    })
}

/// Evanescent gap-to-coupling map `|κ|(g) = κ₀·exp(−g/g₀)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapCouplingMap {
    pub kappa0: f64,
    /// Field decay length g₀ in meters.
    pub decay_length: f64,
}

impl GapCouplingMap {
    pub fn new(kappa0: f64, decay_length: f64) -> Result<Self> {
        if !(kappa0 > 0.0 && decay_length > 0.0) {
            return Err(Error::Config(format!(
                "gap map needs positive kappa0 and decay length, got {kappa0}, {decay_length}"
            )));
        }
        Ok(Self { kappa0, decay_length })
    }

    /// Power cross-coupling at `gap`, capped at 1.
    pub fn kappa_sq(&self, gap: f64) -> f64 {
        let k = self.kappa0 * (-gap / self.decay_length).exp();
        (k * k).min(1.0)
    }

    pub fn t_sq(&self, gap: f64) -> f64 {
        1.0 - self.kappa_sq(gap)
    }
}

/// Result of a gap-map fit with residual diagnostics on `ln|κ|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapFit {
    pub map: GapCouplingMap,
    pub rms_residual: f64,
    pub max_residual: f64,
    /// Set when the residuals exceed [`GapFit::POOR_FIT_RESIDUAL`].
    pub poor_fit: bool,
}

impl GapFit {
    /// Largest acceptable residual in `ln|κ|` (about 15% in |κ|).
    pub const POOR_FIT_RESIDUAL: f64 = 0.15;
}

fn ln_kappa(t_sq: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&t_sq) {
        return Err(Error::Fit(format!("observation t_sq={t_sq} must lie in [0, 1)")));
    }
    Ok(0.5 * (1.0 - t_sq).ln())
}

fn finish_fit(observations: &[(f64, f64)], ln_k0: f64, slope: f64) -> Result<GapFit> {
    if !(slope < 0.0) {
        return Err(Error::Fit(format!(
            "coupling does not decay with gap (slope {slope:.3e} per meter)"
        )));
    }
    let map = GapCouplingMap::new(ln_k0.exp(), -1.0 / slope)?;
    let mut sum_sq = 0.0;
    let mut max_residual: f64 = 0.0;
    for &(gap, t_sq) in observations {
        let r = ln_kappa(t_sq)? - (ln_k0 + slope * gap);
        sum_sq += r * r;
        max_residual = max_residual.max(r.abs());
    }
    let rms_residual = (sum_sq / observations.len() as f64).sqrt();
    Ok(GapFit {
        map,
        rms_residual,
        max_residual,
        poor_fit: max_residual > GapFit::POOR_FIT_RESIDUAL,
    })
}

/// Least-squares line through `(gap, ln|κ|)` for observations `(gap, t²)`.
pub fn fit_gap_map(observations: &[(f64, f64)]) -> Result<GapFit> {
    if observations.len() < 2 {
        return Err(Error::Fit("need at least two observations".into()));
    }
    let n = observations.len() as f64;
    let ys: Vec<f64> = observations
        .iter()
        .map(|&(_, t)| ln_kappa(t))
        .collect::<Result<_>>()?;
    let mean_x = observations.iter().map(|o| o.0).sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = observations.iter().map(|o| (o.0 - mean_x).powi(2)).sum();
    if sxx <= (mean_x.abs() * 1e-9).powi(2) * n {
        return Err(Error::Fit("observations do not span distinct gaps".into()));
    }
    let sxy: f64 = observations
        .iter()
        .zip(&ys)
        .map(|(o, y)| (o.0 - mean_x) * (y - mean_y))
        .sum();
    let slope = sxy / sxx;
    finish_fit(observations, mean_y - slope * mean_x, slope)
}

/// Fit with the line pinned through `anchor = (gap, κ²)`; only the decay
/// length is free.
pub fn fit_gap_map_anchored(anchor: (f64, f64), observations: &[(f64, f64)]) -> Result<GapFit> {
    let (g_a, k_sq_a) = anchor;
    if !(k_sq_a > 0.0 && k_sq_a <= 1.0) {
        return Err(Error::Fit(format!("anchor κ² must lie in (0, 1], got {k_sq_a}")));
    }
    let y_a = 0.5 * k_sq_a.ln();
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &(gap, t_sq) in observations {
        let dx = gap - g_a;
        sxx += dx * dx;
        sxy += dx * (ln_kappa(t_sq)? - y_a);
    }
    if sxx <= 0.0 {
        return Err(Error::Fit("observations coincide with the anchor gap".into()));
    }
    let slope = sxy / sxx;
    let mut all = observations.to_vec();
    all.push((g_a, 1.0 - k_sq_a));
    finish_fit(&all, y_a - slope * g_a, slope)
}

/// Figures of merit for one device at a pump and a photon wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSourceFigures {
    pub p_drop: f64,
    pub p_thru: f64,
    /// Zero unless the loss-aware routing was requested.
    pub p_loss: f64,
    pub eta_coinc: f64,
    pub buildup_factor: f64,
    pub relative_pump_power: f64,
}

/// Routing is evaluated at `photon_wavelength` and used for both photons.
pub fn figures(
    device: &DeviceSpec,
    reference: &DeviceSpec,
    pump_wavelength: f64,
    photon_wavelength: f64,
    with_loss: bool,
) -> Result<PairSourceFigures> {
    let routing = device_routing(device, photon_wavelength, with_loss)?;
    let (_, buildup) = peak_buildup(device, pump_wavelength)?;
    Ok(PairSourceFigures {
        p_drop: routing.p_drop,
        p_thru: routing.p_thru,
        p_loss: routing.p_loss,
        eta_coinc: routing.coincidence_ratio(),
        buildup_factor: buildup,
        relative_pump_power: relative_pump_power(device, reference, pump_wavelength)?,
    })
}

/// Drop-drop coincidence rate up to a constant: pair generation scales with
/// the square of the pump buildup, and both photons must leave through the
/// drop port (loss-aware routing).
pub fn relative_drop_pair_rate(device: &DeviceSpec, pump: f64, signal: f64, idler: f64) -> Result<f64> {
    let b = buildup_factor(device, pump);
    let s = device_routing(device, signal, true)?.p_drop;
    let i = device_routing(device, idler, true)?.p_drop;
    Ok(b * b * s * i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{PointCoupler, RingGeometry, WaveguideModel};
    use proptest::prelude::*;

    fn ring(k1: f64, k2: f64, loss: f64) -> DeviceSpec {
        DeviceSpec::new(
            RingGeometry::new(18.5e-6).unwrap(),
            WaveguideModel::silicon_strip(loss).unwrap(),
            PointCoupler::from_power_coupling(k1).unwrap(),
            PointCoupler::from_power_coupling(k2).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_coupling_splits_evenly() {
        assert_eq!(p_drop(0.9, 0.9).unwrap(), 0.5);
        assert_eq!(coincidence_ratio(0.9, 0.9).unwrap(), 0.25);
    }

    #[test]
    fn decoupled_drop_never_drops() {
        assert_eq!(p_drop(0.9, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn asymmetric_example() {
        let p = p_drop(0.96, 0.5).unwrap();
        assert!((p - 0.5 / 0.54).abs() < 1e-15);
        assert!((p - 0.9259).abs() < 1e-4);
        let eta = coincidence_ratio(0.96, 0.5).unwrap();
        assert!((eta - 0.8573).abs() < 1e-4);
    }

    #[test]
    fn fully_decoupled_device_is_degenerate() {
        assert!(matches!(p_drop(1.0, 1.0), Err(Error::Degenerate(_))));
        assert!(matches!(coincidence_ratio(1.0, 1.0), Err(Error::Degenerate(_))));
        assert!(p_drop(1.2, 0.5).is_err());
    }

    #[test]
    fn input_decoupled_limit_approaches_unity() {
        assert!(coincidence_ratio(0.9999, 0.5).unwrap() > 0.999);
    }

    #[test]
    fn lossy_routing_reduces_to_lossless() {
        let a = routing_with_loss(0.8, 0.6, 1.0).unwrap();
        let b = Routing::lossless(0.8, 0.6).unwrap();
        assert!((a.p_drop - b.p_drop).abs() < 1e-15);
        let lossy = routing_with_loss(0.8, 0.6, 0.9).unwrap();
        assert!((lossy.p_drop + lossy.p_thru + lossy.p_loss - 1.0).abs() < 1e-15);
        assert!(lossy.p_loss > 0.0);
    }

    #[test]
    fn buildup_vanishes_without_input_coupling() {
        let d = ring(0.0, 0.1, 100.0);
        assert_eq!(buildup_factor(&d, 1550e-9), 0.0);
        assert_eq!(relative_pump_power(&d, &ring(0.1, 0.1, 100.0), 1550e-9).unwrap(), f64::INFINITY);
    }

    #[test]
    fn buildup_minimum_is_anti_resonant() {
        let d = ring(0.05, 0.05, 200.0);
        let (_, res) = transfer::resonance_near(&d, 1550e-9).unwrap();
        let fsr = d.fsr_at(res).unwrap();
        let anti = buildup_factor(&d, res + fsr / 2.0);
        let n = 400;
        let min = (0..n)
            .map(|i| buildup_factor(&d, res + fsr * i as f64 / n as f64))
            .fold(f64::INFINITY, f64::min);
        assert!((anti - min).abs() / min < 1e-3, "{anti} vs {min}");
        assert!(buildup_factor(&d, res) > 10.0 * anti);
    }

    #[test]
    fn buildup_peaks_at_critical_coupling() {
        // Scan t1 at fixed t2 and loss; maximum sits at t1 = a·t2.
        let (t2_sq, loss) = (0.95, 300.0);
        let probe = ring(0.1, 1.0 - t2_sq, loss);
        let a = probe.round_trip_amplitude();
        let mut best = (0.0, 0.0);
        for i in 1..2000 {
            let k1 = 0.2 * i as f64 / 2000.0;
            let (_, b) = peak_buildup(&ring(k1, 1.0 - t2_sq, loss), 1550e-9).unwrap();
            if b > best.1 {
                best = (1.0 - k1, b);
            }
        }
        let critical_t1 = a * t2_sq.sqrt();
        assert!((best.0.sqrt() - critical_t1).abs() < 2e-4, "{} vs {critical_t1}", best.0.sqrt());
    }

    #[test]
    fn relative_pump_of_identical_devices_is_one() {
        let d = ring(0.04, 0.04, 1500.0);
        let r = relative_pump_power(&d, &d, 1550e-9).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_decay_length_raises_pump_requirement_analytically() {
        let map = GapCouplingMap::new(0.75, 100e-9).unwrap();
        let (g, t2_sq) = (200e-9, map.t_sq(150e-9));
        let k_before = map.kappa_sq(g);
        let k_after = map.kappa_sq(g + map.decay_length);
        assert!((k_after / k_before - (-2f64).exp()).abs() < 1e-12);
        let before = ring(k_before, 1.0 - t2_sq, 0.0);
        let after = ring(k_after, 1.0 - t2_sq, 0.0);
        let numeric = relative_pump_power(&after, &before, 1550e-9).unwrap();
        let b = |k: f64| k / (1.0 - (1.0 - k).sqrt() * t2_sq.sqrt()).powi(2);
        let analytic = b(k_before) / b(k_after);
        assert!((numeric - analytic).abs() / analytic < 1e-6, "{numeric} vs {analytic}");
        assert!(numeric > 1.0);
    }

    #[test]
    fn theory_curve_starts_at_symmetric_point() {
        let sweep: Vec<f64> = (0..50).map(|i| 0.9 + 0.0999 * i as f64 / 49.0).collect();
        let curve = theory_curve(0.9, 0.0, &sweep).unwrap();
        assert!((curve[0].relative_pump_power - 1.0).abs() < 1e-12);
        assert!((curve[0].eta_coinc - 0.25).abs() < 1e-12);
        for w in curve.windows(2) {
            assert!(w[1].eta_coinc >= w[0].eta_coinc);
            assert!(w[1].relative_pump_power >= w[0].relative_pump_power);
        }
        assert!(curve.last().unwrap().eta_coinc > 0.99);
        assert!(theory_curve(0.9, 0.0, &[0.5]).is_err());
        assert!(theory_curve(0.9, 0.0, &[1.0]).is_err());
    }

    #[test]
    fn two_exact_points_recover_the_map() {
        let truth = GapCouplingMap::new(0.8, 95e-9).unwrap();
        let obs = [(150e-9, truth.t_sq(150e-9)), (300e-9, truth.t_sq(300e-9))];
        let fit = fit_gap_map(&obs).unwrap();
        assert!((fit.map.kappa0 - 0.8).abs() < 1e-9);
        assert!((fit.map.decay_length - 95e-9).abs() < 1e-15);
        assert!(fit.rms_residual < 1e-9 && !fit.poor_fit);
    }

    #[test]
    fn noisy_observations_recover_parameters() {
        use rand::{Rng, SeedableRng};
        let truth = GapCouplingMap::new(0.75, 100e-9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let obs: Vec<(f64, f64)> = (0..12)
            .map(|i| {
                let g = 150e-9 + 20e-9 * i as f64;
                let noisy = truth.kappa_sq(g) * (1.0 + 0.01 * (rng.random::<f64>() * 2.0 - 1.0) * 1.7);
                (g, 1.0 - noisy)
            })
            .collect();
        let fit = fit_gap_map(&obs).unwrap();
        assert!((fit.map.kappa0 / 0.75 - 1.0).abs() < 0.05);
        assert!((fit.map.decay_length / 100e-9 - 1.0).abs() < 0.05);
    }

    #[test]
    fn scattered_observations_are_flagged() {
        let obs = [
            (150e-9, 1.0 - 0.04),
            (200e-9, 1.0 - 0.001),
            (250e-9, 1.0 - 0.01),
            (300e-9, 1.0 - 0.0005),
        ];
        let fit = fit_gap_map(&obs).unwrap();
        assert!(fit.poor_fit);
    }

    #[test]
    fn identical_gaps_cannot_be_fitted() {
        let obs = [(200e-9, 0.9), (200e-9, 0.95)];
        assert!(matches!(fit_gap_map(&obs), Err(Error::Fit(_))));
        assert!(matches!(fit_gap_map(&obs[..1]), Err(Error::Fit(_))));
    }

    proptest! {
        #[test]
        fn eta_is_square_of_p_drop(t1 in 0.0f64..0.999, t2 in 0.0f64..0.999) {
            let p = p_drop(t1, t2).unwrap();
            prop_assert_eq!(coincidence_ratio(t1, t2).unwrap(), p * p);
        }

        #[test]
        fn swapping_couplers_complements_p_drop(t1 in 0.0f64..0.999, t2 in 0.0f64..0.999) {
            let s = p_drop(t1, t2).unwrap() + p_drop(t2, t1).unwrap();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
