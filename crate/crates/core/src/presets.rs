//! Reference devices and calibrations.

use crate::error::Result;
use crate::model::{DeviceSpec, MziCouplerSpec, PointCoupler, RingGeometry, WaveguideModel};
use crate::pair::{fit_gap_map_anchored, GapCouplingMap, GapFit};
use crate::transfer;
use std::f64::consts::PI;

pub const PUMP_WAVELENGTH: f64 = 1550e-9;

/// Round-trip field amplitude assumed for the gap-family rings.
pub const GAP_FAMILY_ROUND_TRIP_AMPLITUDE: f64 = 0.98;
pub const GAP_FAMILY_RADIUS: f64 = 18.5e-6;
pub const GAP_FAMILY_DROP_GAP: f64 = 150e-9;
pub const GAP_FAMILY_INPUT_GAPS: [f64; 4] = [150e-9, 225e-9, 300e-9, 350e-9];

/// Measured coincidence ratios of the asymmetric gap-family devices, as
/// (input gap, η).
pub const GAP_FAMILY_MEASURED_ETA: [(f64, f64); 3] = [(225e-9, 0.809), (300e-9, 0.911), (350e-9, 0.967)];

/// Extra pump power the asymmetric devices needed, as (input gap, factor).
pub const GAP_FAMILY_MEASURED_PUMP: [(f64, f64); 3] = [(225e-9, 2.56), (300e-9, 8.60), (350e-9, 10.1)];

/// Loss in dB/m that gives round-trip amplitude `a` on a ring of `radius`.
pub fn loss_for_round_trip_amplitude(radius: f64, a: f64) -> f64 {
    -20.0 * a.log10() / (2.0 * PI * radius)
}

/// Input self-coupling that reproduces a coincidence ratio `eta` given the
/// drop-side self-coupling `t2_sq`.
pub fn t1_sq_from_eta(eta: f64, t2_sq: f64) -> f64 {
    2.0 - t2_sq - (1.0 - t2_sq) / eta.sqrt()
}

/// Gap map anchored so that a 150 nm coupler has `κ² = 1 − 0.98²` (the
/// symmetric gap-family ring is then critically coupled), with the decay
/// length fitted to the couplings implied by the measured ratios.
pub fn default_gap_fit() -> GapFit {
    let a = GAP_FAMILY_ROUND_TRIP_AMPLITUDE;
    let anchor_kappa_sq = 1.0 - a * a;
    let t2_sq = 1.0 - anchor_kappa_sq;
    let observations: Vec<(f64, f64)> = GAP_FAMILY_MEASURED_ETA
        .iter()
        .map(|&(gap, eta)| (gap, t1_sq_from_eta(eta, t2_sq)))
        .collect();
    fit_gap_map_anchored((GAP_FAMILY_DROP_GAP, anchor_kappa_sq), &observations).expect("calibration data is valid")
}

pub fn default_gap_map() -> GapCouplingMap {
    default_gap_fit().map
}

/// Point-coupled ring of the gap family with the given input gap.
pub fn gap_family_device(map: &GapCouplingMap, input_gap: f64) -> Result<DeviceSpec> {
    let loss = loss_for_round_trip_amplitude(GAP_FAMILY_RADIUS, GAP_FAMILY_ROUND_TRIP_AMPLITUDE);
    DeviceSpec::new(
        RingGeometry::new(GAP_FAMILY_RADIUS)?,
        WaveguideModel::silicon_strip(loss)?,
        PointCoupler::from_power_coupling(map.kappa_sq(input_gap))?,
        PointCoupler::from_power_coupling(map.kappa_sq(GAP_FAMILY_DROP_GAP))?,
    )
}

/// Symmetric point-coupled ring.
pub fn symmetric_ring(radius: f64, kappa_sq: f64, loss_db_per_m: f64) -> Result<DeviceSpec> {
    let c = PointCoupler::from_power_coupling(kappa_sq)?;
    DeviceSpec::new(RingGeometry::new(radius)?, WaveguideModel::silicon_strip(loss_db_per_m)?, c, c)
}

pub const TABLE1_RADIUS: f64 = 15e-6;
pub const TABLE1_INPUT_GAP: f64 = 250e-9;
pub const TABLE1_OUTPUT_GAP: f64 = 175e-9;
pub const TABLE1_INPUT_DELTA_L: f64 = 47.8e-6;
pub const TABLE1_OUTPUT_DELTA_L: f64 = 48.0e-6;
/// Ring arc inside each MZI coupler; the longer arm is the bus arm.
pub const TABLE1_RING_ARM: f64 = 20e-6;

/// Bus-arm bias that puts an MZI at quadrature at `wavelength` with its
/// heater off.
fn quadrature_bias(waveguide: &WaveguideModel, bus: f64, ring: f64, wavelength: f64) -> f64 {
    (PI / 2.0 - waveguide.beta(wavelength) * (bus - ring)).rem_euclid(2.0 * PI)
}

/// Ring with two MZI couplers sized like the fabricated dual-MZI device.
///
/// Sub-couplers follow the default gap map. The propagation loss makes the
/// ring critically coupled when the input MZI is fully crossed and the output
/// MZI is barred. With heaters off, both MZIs sit at quadrature at the
/// resonance nearest 1550 nm, so every resonance couples to both buses.
pub fn table1_dmzr() -> Result<DeviceSpec> {
    let map = default_gap_map();
    let k_in = map.kappa_sq(TABLE1_INPUT_GAP);
    let k_out = map.kappa_sq(TABLE1_OUTPUT_GAP);
    let max_cross = 4.0 * k_in * (1.0 - k_in);
    let a = (1.0 - max_cross).sqrt();
    let waveguide = WaveguideModel::silicon_strip(loss_for_round_trip_amplitude(TABLE1_RADIUS, a))?;
    let geometry = RingGeometry::new(TABLE1_RADIUS)?;

    let probe = symmetric_ring(TABLE1_RADIUS, 0.5, 0.0)?;
    let untuned_pump = transfer::bare_resonance(&probe, transfer::nearest_mode(&probe, PUMP_WAVELENGTH))?;

    let mzi = |k: f64, delta_l: f64| -> Result<MziCouplerSpec> {
        let c = PointCoupler::from_power_coupling(k)?;
        let bus = TABLE1_RING_ARM + delta_l;
        Ok(MziCouplerSpec::new(c, c, bus, TABLE1_RING_ARM)?
            .with_phase_bias(quadrature_bias(&waveguide, bus, TABLE1_RING_ARM, untuned_pump)))
    };
    DeviceSpec::new(
        geometry,
        waveguide,
        mzi(k_in, TABLE1_INPUT_DELTA_L)?,
        mzi(k_out, TABLE1_OUTPUT_DELTA_L)?,
    )
}

/// Ring with identical balanced MZI couplers whose path difference is half
/// the circumference, so each MZI flips between cross and bar on adjacent
/// resonances.
pub fn half_circumference_dmzr(radius: f64, sub_kappa_sq: f64, loss_db_per_m: f64) -> Result<DeviceSpec> {
    let c = PointCoupler::from_power_coupling(sub_kappa_sq)?;
    let l = 2.0 * PI * radius;
    let ring_arm = l / 5.0;
    let mzi = MziCouplerSpec::new(c, c, ring_arm + l / 2.0, ring_arm)?;
    DeviceSpec::new(RingGeometry::new(radius)?, WaveguideModel::silicon_strip(loss_db_per_m)?, mzi, mzi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pair::coincidence_ratio;

    #[test]
    fn anchor_is_honoured() {
        let map = default_gap_map();
        assert!((map.kappa_sq(150e-9) - 0.0396).abs() < 1e-12);
        let fit = default_gap_fit();
        assert!((fit.map.decay_length - 94.85e-9).abs() < 0.05e-9, "{fit:?}");
        // The implied couplings do not lie on a single exponential.
        assert!(fit.poor_fit);
    }

    #[test]
    fn eta_inversion_round_trips() {
        for eta in [0.3, 0.809, 0.967] {
            let t1 = t1_sq_from_eta(eta, 0.9604);
            assert!((coincidence_ratio(t1, 0.9604).unwrap() - eta).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_family_loss_gives_target_amplitude() {
        let d = gap_family_device(&default_gap_map(), 150e-9).unwrap();
        assert!((d.round_trip_amplitude() - 0.98).abs() < 1e-12);
        // About 15 dB/cm.
        assert!((d.waveguide.propagation_loss / 100.0 - 15.1).abs() < 0.1);
    }

    #[test]
    fn table1_arms_fit_in_ring() {
        let d = table1_dmzr().unwrap();
        assert!(d.free_arc_length() > 0.0);
        assert!(d.input_coupler.is_mzi() && d.output_coupler.is_mzi());
    }
}
