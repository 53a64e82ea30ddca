//! Resonance finding and extinction measurements on sampled spectra.
//!
//! Resonances are located from dips in the direct-port power (the through
//! port under input excitation, the drop port under add excitation). When at
//! least one dip is visible, ring modes that show no dip are reported too,
//! positioned from the bare round-trip phase and flagged as suppressed. This
//! is what makes a coupler that hides every other resonance observable.

use crate::error::{Error, Result};
use crate::transfer::ComplexSpectrum;
use std::f64::consts::PI;

/// A resonance is suppressed when its coupled power is this far below the
/// median of the strong resonances.
pub const SUPPRESSION_THRESHOLD_DB: f64 = 10.0;

/// Floor used when converting zero power to dB.
const POWER_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct Resonance {
    pub wavelength: f64,
    /// Direct-port extinction against the off-resonance baseline.
    pub depth_db: f64,
    /// Power removed from the excited bus at resonance, `1 − P_direct`, in dB.
    /// Equal to the cross-port peak for a lossless device.
    pub coupled_power_db: f64,
    /// Full width at half depth; `None` when no dip was resolved.
    pub linewidth: Option<f64>,
    /// True when the resonance was resolved as a direct-port dip.
    pub resolved: bool,
    pub suppressed: bool,
}

/// Resonances sorted by wavelength.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResonanceList {
    pub entries: Vec<Resonance>,
}

impl ResonanceList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn wavelengths(&self) -> Vec<f64> {
        self.entries.iter().map(|r| r.wavelength).collect()
    }

    pub fn depths_db(&self) -> Vec<f64> {
        self.entries.iter().map(|r| r.depth_db).collect()
    }

    pub fn suppressed_flags(&self) -> Vec<bool> {
        self.entries.iter().map(|r| r.suppressed).collect()
    }
}

fn to_db(p: f64) -> f64 {
    10.0 * p.max(POWER_FLOOR).log10()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Local FSR in grid points, from the slope of the stored round-trip phase.
fn fsr_points(spectrum: &ComplexSpectrum, index: usize) -> usize {
    let n = spectrum.len();
    let phase = &spectrum.round_trip_phase;
    let (lo, hi) = if index == 0 {
        (0, 1)
    } else if index + 1 >= n {
        (n - 2, n - 1)
    } else {
        (index - 1, index + 1)
    };
    let per_point = (phase[hi] - phase[lo]).abs() / (hi - lo) as f64;
    if per_point <= 0.0 || !per_point.is_finite() {
        return n;
    }
    ((2.0 * PI / per_point).round() as usize).clamp(2, n.max(2))
}

/// Fractional grid position of `wavelength`.
fn grid_position(spectrum: &ComplexSpectrum, wavelength: f64) -> f64 {
    (wavelength - spectrum.grid.start) / spectrum.grid.step()
}

/// Direct-port power at an arbitrary in-grid wavelength, by three-point
/// interpolation of the dB trace.
fn direct_power_at(power_db: &[f64], position: f64) -> f64 {
    let n = power_db.len();
    let center = (position.round() as usize).clamp(1, n - 2);
    let x = position - center as f64;
    let (y0, y1, y2) = (power_db[center - 1], power_db[center], power_db[center + 1]);
    let db = y1 + 0.5 * x * (y2 - y0) + 0.5 * x * x * (y2 - 2.0 * y1 + y0);
    // Never extrapolate below the sampled minimum.
    let floor = y0.min(y1).min(y2);
    10f64.powf(db.max(floor) / 10.0)
}

/// Off-resonance baseline: median direct power over one FSR around
/// `position`, excluding the contiguous dip below half depth.
fn baseline(power: &[f64], position: f64, value: f64, half_window: usize) -> f64 {
    let n = power.len();
    let center = (position.round() as usize).min(n - 1);
    let lo = center.saturating_sub(half_window);
    let hi = (center + half_window).min(n - 1);
    let mut window: Vec<f64> = power[lo..=hi].to_vec();
    let provisional = median(&mut window);
    let half = 0.5 * (provisional + value);
    if value >= half {
        return provisional;
    }
    let mut left = center;
    while left > lo && power[left - 1] < half {
        left -= 1;
    }
    let mut right = center;
    while right < hi && power[right + 1] < half {
        right += 1;
    }
    let mut rest: Vec<f64> = (lo..=hi)
        .filter(|&i| (i < left || i > right) && !(i == center && power[i] < half))
        .map(|i| power[i])
        .collect();
    if rest.is_empty() {
        provisional
    } else {
        median(&mut rest)
    }
}

/// Direct-port extinction at `wavelength` in dB (baseline over the
/// enclosing FSR divided by the power at `wavelength`).
pub fn extinction_db(spectrum: &ComplexSpectrum, wavelength: f64) -> Result<f64> {
    if !spectrum.grid.contains(wavelength) {
        return Err(Error::Domain(format!(
            "wavelength {wavelength} outside grid [{}, {}]",
            spectrum.grid.start, spectrum.grid.stop
        )));
    }
    if spectrum.len() < 3 {
        return Err(Error::Domain("extinction needs at least 3 grid points".into()));
    }
    let power = spectrum.direct_power();
    let power_db: Vec<f64> = power.iter().copied().map(to_db).collect();
    let pos = grid_position(spectrum, wavelength);
    let value = direct_power_at(&power_db, pos);
    let half_window = fsr_points(spectrum, pos.round() as usize) / 2;
    let base = baseline(&power, pos, value, half_window);
    Ok(to_db(base) - to_db(value))
}

/// Topographic prominence of the minimum at `i`, searched within `reach`.
fn prominence(power_db: &[f64], i: usize, reach: usize) -> f64 {
    let n = power_db.len();
    let y = power_db[i];
    let mut left_max = y;
    let mut j = i;
    while j > 0 && i - j < reach {
        j -= 1;
        if power_db[j] < y {
            break;
        }
        left_max = left_max.max(power_db[j]);
    }
    let mut right_max = y;
    let mut j = i;
    while j + 1 < n && j - i < reach {
        j += 1;
        if power_db[j] < y {
            break;
        }
        right_max = right_max.max(power_db[j]);
    }
    left_max.min(right_max) - y
}

/// Width of the dip at `i` where power crosses halfway to `base`.
fn dip_width(spectrum: &ComplexSpectrum, power: &[f64], i: usize, base: f64, reach: usize) -> Option<f64> {
    let n = power.len();
    let half = 0.5 * (base + power[i]);
    let step = spectrum.grid.step();
    let mut l = i;
    while l > 0 && power[l] < half && i - l < reach {
        l -= 1;
    }
    let mut r = i;
    while r + 1 < n && power[r] < half && r - i < reach {
        r += 1;
    }
    if power[l] < half || power[r] < half {
        return None;
    }
    // Linear interpolation of the two half-level crossings.
    let cross = |a: usize, b: usize| {
        let (pa, pb) = (power[a], power[b]);
        let frac = if (pb - pa).abs() > 0.0 { (half - pa) / (pb - pa) } else { 0.5 };
        a as f64 + frac * (b as f64 - a as f64)
    };
    let left = cross(l, l + 1);
    let right = cross(r, r - 1);
    Some((right - left).abs() * step)
}

/// Locate resonances whose direct-port dip exceeds `prominence_db`, add
/// hidden ring modes, and flag suppressed ones.
///
/// The grid should resolve each linewidth with several points; about 20 per
/// linewidth gives sub-percent wavelength accuracy.
pub fn find_resonances(spectrum: &ComplexSpectrum, prominence_db: f64) -> Result<ResonanceList> {
    let n = spectrum.len();
    if n < 3 {
        return Ok(ResonanceList::default());
    }
    let power = spectrum.direct_power();
    let power_db: Vec<f64> = power.iter().copied().map(to_db).collect();
    let step = spectrum.grid.step();

    // Candidate dips.
    let mut dips: Vec<(f64, usize)> = Vec::new();
    for i in 1..n - 1 {
        if !(power_db[i] < power_db[i - 1] && power_db[i] <= power_db[i + 1]) {
            continue;
        }
        let reach = fsr_points(spectrum, i) / 2;
        if prominence(&power_db, i, reach.max(1)) < prominence_db {
            continue;
        }
        let (y0, y1, y2) = (power_db[i - 1], power_db[i], power_db[i + 1]);
        let curvature = y0 - 2.0 * y1 + y2;
        let offset = if curvature > 0.0 {
            (0.5 * (y0 - y2) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        dips.push((i as f64 + offset, i));
    }
    if dips.is_empty() {
        return Ok(ResonanceList::default());
    }

    // Ring modes crossing the grid, as fractional positions.
    let phase = &spectrum.round_trip_phase;
    let mut modes: Vec<f64> = Vec::new();
    for i in 0..n - 1 {
        let (a, b) = (phase[i], phase[i + 1]);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let mut m = (lo / (2.0 * PI)).ceil();
        while 2.0 * PI * m <= hi {
            let target = 2.0 * PI * m;
            if target > lo || (target == lo && a == target) {
                let frac = if b != a { (target - a) / (b - a) } else { 0.0 };
                modes.push(i as f64 + frac);
            }
            m += 1.0;
        }
    }

    // Each mode takes the nearest dip within half an FSR; leftover dips
    // stand alone.
    let mut positions: Vec<(f64, Option<usize>)> = Vec::new();
    let mut used = vec![false; dips.len()];
    for &mode_pos in &modes {
        let half_fsr = fsr_points(spectrum, mode_pos.round() as usize) as f64 / 2.0;
        let best = dips
            .iter()
            .enumerate()
            .filter(|(k, (p, _))| !used[*k] && (p - mode_pos).abs() < half_fsr)
            .min_by(|a, b| (a.1 .0 - mode_pos).abs().total_cmp(&(b.1 .0 - mode_pos).abs()));
        match best {
            Some((k, &(p, idx))) => {
                used[k] = true;
                positions.push((p, Some(idx)));
            }
            None => positions.push((mode_pos, None)),
        }
    }
    for (k, &(p, idx)) in dips.iter().enumerate() {
        if !used[k] {
            positions.push((p, Some(idx)));
        }
    }
    positions.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut entries = Vec::with_capacity(positions.len());
    for (pos, dip) in positions {
        let value = direct_power_at(&power_db, pos);
        let half_window = fsr_points(spectrum, pos.round() as usize) / 2;
        let base = baseline(&power, pos, value, half_window);
        let linewidth = dip.and_then(|i| dip_width(spectrum, &power, i, base, half_window.max(1)));
        entries.push(Resonance {
            wavelength: spectrum.grid.start + pos * step,
            depth_db: to_db(base) - to_db(value),
            coupled_power_db: to_db(1.0 - value),
            linewidth,
            resolved: dip.is_some(),
            suppressed: false,
        });
    }

    let strongest = entries
        .iter()
        .map(|r| r.coupled_power_db)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut strong: Vec<f64> = entries
        .iter()
        .map(|r| r.coupled_power_db)
        .filter(|&p| p >= strongest - SUPPRESSION_THRESHOLD_DB)
        .collect();
    let reference = median(&mut strong);
    for r in &mut entries {
        r.suppressed = r.coupled_power_db <= reference - SUPPRESSION_THRESHOLD_DB;
    }
    Ok(ResonanceList { entries })
}

/// Pump, signal and idler wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfwmTriplet {
    pub pump: f64,
    pub signal: f64,
    pub idler: f64,
    /// Index of the pump inside the resonance list.
    pub pump_index: usize,
    /// Mode spacing between pump and signal/idler, in resonance-list steps.
    pub order: usize,
}

impl SfwmTriplet {
    /// Wavelength error of the energy-conservation condition
    /// `2/λp = 1/λs + 1/λi`, expressed at the pump wavelength.
    pub fn energy_mismatch(&self) -> f64 {
        let mismatch = 2.0 / self.pump - 1.0 / self.signal - 1.0 / self.idler;
        (mismatch * self.pump * self.pump / 2.0).abs()
    }
}

/// Pick the resonance nearest `pump_target` as pump and the closest
/// supported pair symmetric about it as signal (shorter wavelength) and idler.
pub fn select_sfwm_triplet(resonances: &ResonanceList, pump_target: f64) -> Result<SfwmTriplet> {
    let n = resonances.len();
    if n < 3 {
        return Err(Error::Selection(format!("need at least 3 resonances, found {n}")));
    }
    let entries = &resonances.entries;
    let pump_index = entries
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1.wavelength - pump_target)
                .abs()
                .total_cmp(&(b.1.wavelength - pump_target).abs())
        })
        .map(|(i, _)| i)
        .expect("non-empty");
    let mut k = 1;
    loop {
        if k > pump_index || pump_index + k >= n {
            return Err(Error::Selection(format!(
                "no supported resonance pair symmetric about the pump at {:.6e} m",
                entries[pump_index].wavelength
            )));
        }
        let (s, i) = (&entries[pump_index - k], &entries[pump_index + k]);
        if !s.suppressed && !i.suppressed {
            let triplet = SfwmTriplet {
                pump: entries[pump_index].wavelength,
                signal: s.wavelength,
                idler: i.wavelength,
                pump_index,
                order: k,
            };
            let spacing = (i.wavelength - s.wavelength) / (2 * k) as f64;
            let tolerance = entries[pump_index]
                .linewidth
                .unwrap_or(0.1 * spacing)
                .max(0.02 * spacing);
            if triplet.energy_mismatch() > tolerance {
                return Err(Error::Selection(format!(
                    "pair at order {k} violates energy conservation by {:.3e} m",
                    triplet.energy_mismatch()
                )));
            }
            return Ok(triplet);
        }
        k += 1;
    }
}
