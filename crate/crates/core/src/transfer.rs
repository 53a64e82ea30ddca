//! Through- and drop-port field transmission of a ring with point or MZI couplers.
//!
//! Each coupler is reduced to a 2x2 scattering matrix at the wavelength of
//! interest (port 0 = bus, port 1 = ring). For an MZI coupler the matrix
//! already contains the propagation along the ring arm, so the ring loop is
//! closed by the two remaining free arcs, each carrying half of the ring
//! heater phase.
//!
//! Field convention: propagation over a length `L` multiplies by `a·e^{+iβL}`.

use crate::error::{Error, Result};
use crate::matrix::Mat2;
use crate::model::{Coupler, DeviceSpec, MziCouplerSpec, WaveguideModel, WavelengthGrid};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Which bus input carries the probe light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Excitation {
    /// Light enters the input port; the through port is the direct output.
    Input,
    /// Light enters the add port; the drop port is the direct output.
    Add,
}

impl Excitation {
    pub fn label(&self) -> &'static str {
        match self {
            Excitation::Input => "input->through",
            Excitation::Add => "add->drop",
        }
    }
}

/// `C_b · P(λ) · C_a` for an MZI coupler; the heater and bias phases sit on
/// the bus arm.
pub fn effective_coupler(spec: &MziCouplerSpec, wavelength: f64, waveguide: &WaveguideModel) -> Mat2 {
    let heater = Complex64::from_polar(1.0, spec.tunable_phase + spec.phase_bias);
    let bus = waveguide.transfer(spec.bus_arm_length, wavelength) * heater;
    let ring = waveguide.transfer(spec.ring_arm_length, wavelength);
    spec.sub_coupler_b.matrix() * Mat2::diag(bus, ring) * spec.sub_coupler_a.matrix()
}

pub fn coupler_matrix(coupler: &Coupler, wavelength: f64, waveguide: &WaveguideModel) -> Mat2 {
    match coupler {
        Coupler::Point(p) => p.matrix(),
        Coupler::Mzi(m) => effective_coupler(m, wavelength, waveguide),
    }
}

/// Field amplitudes at one wavelength for one excitation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldResponse {
    pub through: Complex64,
    pub drop: Complex64,
    /// Ring field just after the coupler on the excited side.
    pub circulating: Complex64,
}

/// The closed ring loop at a single wavelength.
#[derive(Debug, Clone, Copy)]
pub struct RingLoop {
    pub input: Mat2,
    pub output: Mat2,
    /// Free arc from the input coupler to the output coupler.
    pub arc_in_to_out: Complex64,
    /// Free arc from the output coupler back to the input coupler.
    pub arc_out_to_in: Complex64,
}

impl RingLoop {
    pub fn at(device: &DeviceSpec, wavelength: f64) -> Self {
        let wg = &device.waveguide;
        let arc = wg.transfer(device.free_arc_length(), wavelength)
            * Complex64::from_polar(1.0, device.geometry.ring_phase_offset / 2.0);
        Self {
            input: coupler_matrix(&device.input_coupler, wavelength, wg),
            output: coupler_matrix(&device.output_coupler, wavelength, wg),
            arc_in_to_out: arc,
            arc_out_to_in: arc,
        }
    }

    /// Complex round-trip gain of a ring-bound field.
    pub fn loop_gain(&self) -> Complex64 {
        self.arc_in_to_out * self.arc_out_to_in * self.input.m[1][1] * self.output.m[1][1]
    }

    pub fn respond(&self, excitation: Excitation) -> FieldResponse {
        let m1 = &self.input.m;
        let m2 = &self.output.m;
        let (a, b) = (self.arc_in_to_out, self.arc_out_to_in);
        let denom = Complex64::new(1.0, 0.0) - self.loop_gain();
        match excitation {
            Excitation::Input => {
                // Ring field leaving the input coupler, summed over round trips.
                let circulating = m1[1][0] / denom;
                let at_output = a * circulating;
                let back_at_input = b * m2[1][1] * at_output;
                FieldResponse {
                    through: m1[0][0] + m1[0][1] * back_at_input,
                    drop: m2[0][1] * at_output,
                    circulating,
                }
            }
            Excitation::Add => {
                let circulating = m2[1][0] / denom;
                let at_input = b * circulating;
                let back_at_output = a * m1[1][1] * at_input;
                FieldResponse {
                    through: m1[0][1] * at_input,
                    drop: m2[0][0] + m2[0][1] * back_at_output,
                    circulating,
                }
            }
        }
    }
}

pub fn response_at(device: &DeviceSpec, wavelength: f64, excitation: Excitation) -> FieldResponse {
    RingLoop::at(device, wavelength).respond(excitation)
}

/// Propagation phase of one full ring round trip, heater offset included.
pub fn round_trip_phase(device: &DeviceSpec, wavelength: f64) -> f64 {
    device.waveguide.beta(wavelength) * device.round_trip_length() + device.geometry.ring_phase_offset
}

/// dφ/dλ of the round-trip phase.
pub fn round_trip_phase_slope(device: &DeviceSpec, wavelength: f64) -> f64 {
    -2.0 * PI * device.waveguide.group_index * device.round_trip_length() / (wavelength * wavelength)
}

/// Sampled complex transmission of a device for one excitation.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub grid: WavelengthGrid,
    pub excitation: Excitation,
    pub through_amplitude: Vec<Complex64>,
    pub drop_amplitude: Vec<Complex64>,
    /// Bare round-trip phase per point; marks where the ring itself resonates
    /// even when a coupler hides the resonance from both ports.
    pub round_trip_phase: Vec<f64>,
}

impl ComplexSpectrum {
    pub fn len(&self) -> usize {
        self.through_amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.through_amplitude.is_empty()
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        self.grid.wavelengths()
    }

    pub fn through_power(&self) -> Vec<f64> {
        self.through_amplitude.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn drop_power(&self) -> Vec<f64> {
        self.drop_amplitude.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Power at the output on the excited bus (through for input excitation,
    /// drop for add excitation).
    pub fn direct_power(&self) -> Vec<f64> {
        match self.excitation {
            Excitation::Input => self.through_power(),
            Excitation::Add => self.drop_power(),
        }
    }

    /// Power transferred to the opposite bus.
    pub fn cross_power(&self) -> Vec<f64> {
        match self.excitation {
            Excitation::Input => self.drop_power(),
            Excitation::Add => self.through_power(),
        }
    }
}

pub fn device_spectrum(
    device: &DeviceSpec,
    grid: &WavelengthGrid,
    excitation: Excitation,
) -> Result<ComplexSpectrum> {
    device.validate()?;
    let points: Vec<(Complex64, Complex64, f64)> = (0..grid.points)
        .into_par_iter()
        .map(|i| {
            let lam = grid.wavelength(i);
            let r = response_at(device, lam, excitation);
            (r.through, r.drop, round_trip_phase(device, lam))
        })
        .collect();
    let mut through_amplitude = Vec::with_capacity(points.len());
    let mut drop_amplitude = Vec::with_capacity(points.len());
    let mut round_trip = Vec::with_capacity(points.len());
    for (t, d, p) in points {
        through_amplitude.push(t);
        drop_amplitude.push(d);
        round_trip.push(p);
    }
    Ok(ComplexSpectrum {
        grid: *grid,
        excitation,
        through_amplitude,
        drop_amplitude,
        round_trip_phase: round_trip,
    })
}

/// Longitudinal mode number whose bare resonance lies nearest `wavelength`.
pub fn nearest_mode(device: &DeviceSpec, wavelength: f64) -> i64 {
    (round_trip_phase(device, wavelength) / (2.0 * PI)).round() as i64
}

/// Wavelength where the bare round-trip phase equals `2π·mode`.
///
/// With the first-order dispersion model the phase is affine in 1/λ, so this
/// is solved in closed form.
pub fn bare_resonance(device: &DeviceSpec, mode: i64) -> Result<f64> {
    let wg = &device.waveguide;
    let l = device.round_trip_length();
    let offset = 2.0 * PI * l * (wg.effective_index - wg.group_index) / wg.reference_wavelength
        + device.geometry.ring_phase_offset;
    let denom = 2.0 * PI * mode as f64 - offset;
    if denom <= 0.0 {
        return Err(Error::Domain(format!("mode {mode} has no positive wavelength")));
    }
    Ok(2.0 * PI * l * wg.group_index / denom)
}

/// Resonance of longitudinal mode `mode`, where the loop gain is real and
/// positive. Starts from the bare resonance and corrects for the coupler phase.
pub fn mode_resonance(device: &DeviceSpec, mode: i64) -> Result<f64> {
    let mut lam = bare_resonance(device, mode)?;
    for _ in 0..8 {
        let g = RingLoop::at(device, lam).loop_gain();
        if g.norm() < 1e-9 {
            break;
        }
        let err = g.arg();
        let step = err / round_trip_phase_slope(device, lam);
        lam -= step;
        if step.abs() < lam * 1e-15 {
            break;
        }
    }
    Ok(lam)
}

/// The resonance nearest `target`.
pub fn resonance_near(device: &DeviceSpec, target: f64) -> Result<(i64, f64)> {
    let mode = nearest_mode(device, target);
    let mut best = (mode, mode_resonance(device, mode)?);
    for m in [mode - 1, mode + 1] {
        let lam = mode_resonance(device, m)?;
        if (lam - target).abs() < (best.1 - target).abs() {
            best = (m, lam);
        }
    }
    Ok(best)
}

/// Full width at half maximum of the resonance at `wavelength`, estimated
/// from the loop-gain magnitude (Airy linewidth).
pub fn linewidth(device: &DeviceSpec, wavelength: f64) -> f64 {
    let g = RingLoop::at(device, wavelength).loop_gain().norm();
    let fsr = device.fsr_at(wavelength).unwrap_or(0.0);
    if g <= 1e-12 {
        return fsr / 4.0;
    }
    let phase_width = 2.0 * (1.0 - g) / g.sqrt();
    (phase_width / (2.0 * PI) * fsr).min(fsr / 4.0)
}
