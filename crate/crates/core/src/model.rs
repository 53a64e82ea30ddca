//! Device description: waveguides, couplers, ring geometry and wavelength grids.
//!
//! Every type here is an immutable value. Lengths and wavelengths are in
//! meters, phases in radians, propagation loss in dB per meter.

use crate::error::{Error, Result};
use crate::matrix::Mat2;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Tolerance on `|t|² + |κ|² = 1` for a lossless coupler.
pub const COUPLER_POWER_TOLERANCE: f64 = 1e-12;

/// Optical model of the waveguide cross-section.
///
/// The effective index is expanded to first order around
/// `reference_wavelength`, with the slope fixed by the group index:
/// `n_eff(λ) = n_eff0 + (n_eff0 − n_g)(λ − λ0)/λ0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideModel {
    pub effective_index: f64,
    pub group_index: f64,
    pub reference_wavelength: f64,
    /// Propagation loss in dB per meter.
    pub propagation_loss: f64,
}

impl WaveguideModel {
    pub fn new(
        effective_index: f64,
        group_index: f64,
        reference_wavelength: f64,
        propagation_loss: f64,
    ) -> Result<Self> {
        if !(effective_index > 0.0 && effective_index.is_finite()) {
            return Err(Error::Config(format!(
                "effective_index must be positive, got {effective_index}"
            )));
        }
        if !(group_index > 0.0 && group_index.is_finite()) {
            return Err(Error::Config(format!(
                "group_index must be positive, got {group_index}"
            )));
        }
        if !(reference_wavelength > 0.0 && reference_wavelength.is_finite()) {
            return Err(Error::Config(format!(
                "reference_wavelength must be positive, got {reference_wavelength}"
            )));
        }
        if !(propagation_loss >= 0.0 && propagation_loss.is_finite()) {
            return Err(Error::Config(format!(
                "propagation_loss must be non-negative, got {propagation_loss}"
            )));
        }
        Ok(Self {
            effective_index,
            group_index,
            reference_wavelength,
            propagation_loss,
        })
    }

    /// 500 nm x 220 nm silicon strip defaults: n_eff = 2.4, n_g = 4.2 at 1550 nm.
    pub fn silicon_strip(loss_db_per_m: f64) -> Result<Self> {
        Self::new(2.4, 4.2, 1550e-9, loss_db_per_m)
    }

    /// Same indices, zero propagation loss.
    pub fn lossless(&self) -> Self {
        Self {
            propagation_loss: 0.0,
            ..*self
        }
    }

    pub fn effective_index_at(&self, wavelength: f64) -> f64 {
        let n0 = self.effective_index;
        n0 + (n0 - self.group_index) * (wavelength - self.reference_wavelength)
            / self.reference_wavelength
    }

    /// Propagation constant β(λ) = 2π n_eff(λ)/λ.
    pub(crate) fn beta(&self, wavelength: f64) -> f64 {
        2.0 * PI * self.effective_index_at(wavelength) / wavelength
    }

    /// Field amplitude factor after `length` meters.
    pub fn amplitude(&self, length: f64) -> f64 {
        10f64.powf(-self.propagation_loss * length / 20.0)
    }

    /// Complex field transfer `a·e^{iβL}` without argument checks.
    pub(crate) fn transfer(&self, length: f64, wavelength: f64) -> Complex64 {
        Complex64::from_polar(self.amplitude(length), self.beta(wavelength) * length)
    }
}

/// Phase and amplitude accumulated along a straight or curved section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagation {
    pub phase: f64,
    pub amplitude: f64,
}

impl Propagation {
    pub fn field(&self) -> Complex64 {
        Complex64::from_polar(self.amplitude, self.phase)
    }
}

pub fn propagation_phase(
    waveguide: &WaveguideModel,
    length: f64,
    wavelength: f64,
) -> Result<Propagation> {
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(Error::Domain(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    if !(length >= 0.0 && length.is_finite()) {
        return Err(Error::Domain(format!(
            "length must be non-negative, got {length}"
        )));
    }
    Ok(Propagation {
        phase: waveguide.beta(wavelength) * length,
        amplitude: waveguide.amplitude(length),
    })
}

/// Free spectral range λ²/(n_g·L).
pub fn fsr(waveguide: &WaveguideModel, round_trip_length: f64, wavelength: f64) -> Result<f64> {
    if !(round_trip_length > 0.0 && wavelength > 0.0) {
        return Err(Error::Domain(format!(
            "fsr needs positive length and wavelength, got L={round_trip_length}, λ={wavelength}"
        )));
    }
    Ok(wavelength * wavelength / (waveguide.group_index * round_trip_length))
}

/// Lossless directional coupler with scattering matrix `[[t, κ], [κ, t]]`.
///
/// The cross term carries the `+i` phase: couplers built from a power ratio
/// have real `t` and `κ = i|κ|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointCoupler {
    pub self_coupling_t: Complex64,
    pub cross_coupling_kappa: Complex64,
}

impl PointCoupler {
    pub fn new(t: Complex64, kappa: Complex64) -> Result<Self> {
        let power = t.norm_sqr() + kappa.norm_sqr();
        if (power - 1.0).abs() > COUPLER_POWER_TOLERANCE {
            return Err(Error::Config(format!(
                "coupler is not lossless: |t|²+|κ|² = {power}"
            )));
        }
        // [[t, κ], [κ, t]] is unitary only if t·κ* is purely imaginary.
        if (t * kappa.conj()).re.abs() > 1e-12 {
            return Err(Error::Config(
                "coupler phases break unitarity: Re(t·κ*) must vanish".into(),
            ));
        }
        Ok(Self {
            self_coupling_t: t,
            cross_coupling_kappa: kappa,
        })
    }

    /// Build from the power cross-coupling `|κ|² ∈ [0, 1]`.
    pub fn from_power_coupling(kappa_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa_sq) {
            return Err(Error::Config(format!(
                "power cross-coupling must lie in [0, 1], got {kappa_sq}"
            )));
        }
        Ok(Self {
            self_coupling_t: Complex64::new((1.0 - kappa_sq).sqrt(), 0.0),
            cross_coupling_kappa: Complex64::new(0.0, kappa_sq.sqrt()),
        })
    }

    /// Build from the power self-coupling `|t|²`.
    pub fn from_power_transmission(t_sq: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t_sq) {
            return Err(Error::Config(format!(
                "power self-coupling must lie in [0, 1], got {t_sq}"
            )));
        }
        Self::from_power_coupling(1.0 - t_sq)
    }

    pub fn t_sq(&self) -> f64 {
        self.self_coupling_t.norm_sqr()
    }

    pub fn kappa_sq(&self) -> f64 {
        self.cross_coupling_kappa.norm_sqr()
    }

    pub fn matrix(&self) -> Mat2 {
        let t = self.self_coupling_t;
        let k = self.cross_coupling_kappa;
        Mat2::new([[t, k], [k, t]])
    }
}

/// Two point couplers joined by a bus arm and a ring arm, forming an MZI
/// between the bus waveguide and the ring.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MziCouplerSpec {
    /// First coupling point met by light travelling with the ring mode.
    pub sub_coupler_a: PointCoupler,
    pub sub_coupler_b: PointCoupler,
    pub bus_arm_length: f64,
    /// Arc of the ring between the two coupling points.
    pub ring_arm_length: f64,
    /// Heater phase applied on the bus arm.
    pub tunable_phase: f64,
    /// Static bus-arm phase from fabrication, present with heaters off.
    pub phase_bias: f64,
}

impl MziCouplerSpec {
    pub fn new(
        sub_coupler_a: PointCoupler,
        sub_coupler_b: PointCoupler,
        bus_arm_length: f64,
        ring_arm_length: f64,
    ) -> Result<Self> {
        if !(bus_arm_length > 0.0 && bus_arm_length.is_finite()) {
            return Err(Error::Config(format!(
                "bus_arm_length must be positive, got {bus_arm_length}"
            )));
        }
        if !(ring_arm_length > 0.0 && ring_arm_length.is_finite()) {
            return Err(Error::Config(format!(
                "ring_arm_length must be positive, got {ring_arm_length}"
            )));
        }
        Ok(Self {
            sub_coupler_a,
            sub_coupler_b,
            bus_arm_length,
            ring_arm_length,
            tunable_phase: 0.0,
            phase_bias: 0.0,
        })
    }

    pub fn with_tunable_phase(self, phase: f64) -> Self {
        Self {
            tunable_phase: phase,
            ..self
        }
    }

    pub fn with_phase_bias(self, bias: f64) -> Self {
        Self {
            phase_bias: bias,
            ..self
        }
    }

    /// |bus arm − ring arm|.
    pub fn path_length_difference(&self) -> f64 {
        (self.bus_arm_length - self.ring_arm_length).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingGeometry {
    pub radius: f64,
    /// Lumped round-trip phase from the ring heater.
    pub ring_phase_offset: f64,
}

impl RingGeometry {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("radius must be positive, got {radius}")));
        }
        Ok(Self {
            radius,
            ring_phase_offset: 0.0,
        })
    }

    pub fn circumference(&self) -> f64 {
        2.0 * PI * self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupler {
    Point(PointCoupler),
    Mzi(MziCouplerSpec),
}

impl Coupler {
    /// Length of ring waveguide inside the coupler (zero for a point coupler).
    pub fn ring_arm_length(&self) -> f64 {
        match self {
            Coupler::Point(_) => 0.0,
            Coupler::Mzi(m) => m.ring_arm_length,
        }
    }

    pub fn is_mzi(&self) -> bool {
        matches!(self, Coupler::Mzi(_))
    }

    fn with_tunable_phase(self, phase: f64) -> Self {
        match self {
            Coupler::Point(p) => Coupler::Point(p),
            Coupler::Mzi(m) => Coupler::Mzi(m.with_tunable_phase(phase)),
        }
    }

    fn tunable_phase(&self) -> f64 {
        match self {
            Coupler::Point(_) => 0.0,
            Coupler::Mzi(m) => m.tunable_phase,
        }
    }
}

impl From<PointCoupler> for Coupler {
    fn from(p: PointCoupler) -> Self {
        Coupler::Point(p)
    }
}

impl From<MziCouplerSpec> for Coupler {
    fn from(m: MziCouplerSpec) -> Self {
        Coupler::Mzi(m)
    }
}

/// Heater phases of a device: ring, input-side MZI, output-side MZI.
pub type HeaterPhases = [f64; 3];

/// A double-bus ring source with point or MZI couplers on each side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceSpec {
    pub geometry: RingGeometry,
    pub waveguide: WaveguideModel,
    pub input_coupler: Coupler,
    pub output_coupler: Coupler,
}

impl DeviceSpec {
    pub fn new(
        geometry: RingGeometry,
        waveguide: WaveguideModel,
        input_coupler: impl Into<Coupler>,
        output_coupler: impl Into<Coupler>,
    ) -> Result<Self> {
        let device = Self {
            geometry,
            waveguide,
            input_coupler: input_coupler.into(),
            output_coupler: output_coupler.into(),
        };
        device.validate()?;
        Ok(device)
    }

    pub fn validate(&self) -> Result<()> {
        let arcs = self.input_coupler.ring_arm_length() + self.output_coupler.ring_arm_length();
        let circumference = self.geometry.circumference();
        if arcs > circumference * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "MZI ring arms use {:.4e} m of ring but the circumference is only {:.4e} m",
                arcs, circumference
            )));
        }
        Ok(())
    }

    /// Total ring round-trip length.
    pub fn round_trip_length(&self) -> f64 {
        self.geometry.circumference()
    }

    /// Ring length outside both couplers, split evenly between the two arcs.
    pub fn free_arc_length(&self) -> f64 {
        let arcs = self.input_coupler.ring_arm_length() + self.output_coupler.ring_arm_length();
        (self.round_trip_length() - arcs).max(0.0) / 2.0
    }

    pub fn fsr_at(&self, wavelength: f64) -> Result<f64> {
        fsr(&self.waveguide, self.round_trip_length(), wavelength)
    }

    pub fn phases(&self) -> HeaterPhases {
        [
            self.geometry.ring_phase_offset,
            self.input_coupler.tunable_phase(),
            self.output_coupler.tunable_phase(),
        ]
    }

    /// Copy with the three heater phases replaced. MZI phases are ignored
    /// for point couplers.
    pub fn with_phases(&self, phases: HeaterPhases) -> Self {
        Self {
            geometry: RingGeometry {
                ring_phase_offset: phases[0],
                ..self.geometry
            },
            waveguide: self.waveguide,
            input_coupler: self.input_coupler.with_tunable_phase(phases[1]),
            output_coupler: self.output_coupler.with_tunable_phase(phases[2]),
        }
    }

    pub fn with_waveguide(&self, waveguide: WaveguideModel) -> Self {
        Self { waveguide, ..*self }
    }

    pub fn with_input_coupler(&self, coupler: impl Into<Coupler>) -> Result<Self> {
        let d = Self {
            input_coupler: coupler.into(),
            ..*self
        };
        d.validate()?;
        Ok(d)
    }

    pub fn is_lossless(&self) -> bool {
        self.waveguide.propagation_loss == 0.0
    }

    /// Round-trip field amplitude of the ring.
    pub fn round_trip_amplitude(&self) -> f64 {
        self.waveguide.amplitude(self.round_trip_length())
    }
}

/// Uniform wavelength grid including both end points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl WavelengthGrid {
    pub fn new(start: f64, stop: f64, points: usize) -> Result<Self> {
        if !(start > 0.0 && start.is_finite() && stop.is_finite()) {
            return Err(Error::Config(format!(
                "grid start must be a positive wavelength, got {start}"
            )));
        }
        if start >= stop {
            return Err(Error::Config(format!(
                "grid start ({start}) must be below stop ({stop})"
            )));
        }
        if points < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {points}")));
        }
        Ok(Self { start, stop, points })
    }

    /// Grid of `points` samples centred on `center` spanning `span`.
    pub fn centered(center: f64, span: f64, points: usize) -> Result<Self> {
        Self::new(center - span / 2.0, center + span / 2.0, points)
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.points - 1) as f64
    }

    pub fn wavelength(&self, index: usize) -> f64 {
        if index + 1 == self.points {
            self.stop
        } else {
            self.start + self.step() * index as f64
        }
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.wavelength(i)).collect()
    }

    pub fn contains(&self, wavelength: f64) -> bool {
        wavelength >= self.start && wavelength <= self.stop
    }
}
