//! Peak extraction, the drop-port coincidence-ratio estimator and path-swap
//! calibration.

use super::{ChannelPair, CoincidenceHistogram, Histograms, PerPair};
use crate::error::{Error, Result};

/// Background-subtracted coincidences for the four channel pairs.
///
/// Counts are real-valued so calibrated (geometric-mean) counts can share the
/// type with raw extractions.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoincidenceCounts {
    pub counts: PerPair<f64>,
    /// Variance of each count, propagated from Poisson statistics.
    pub variances: PerPair<f64>,
    /// Raw peak-window sums before subtraction.
    pub raw_peaks: PerPair<f64>,
    pub accidental_estimates: PerPair<f64>,
    /// Set where the accidental estimate exceeded the raw peak and the count
    /// was floored at zero.
    pub floored: PerPair<bool>,
    /// Set where path-swap calibration fell back to the arithmetic mean.
    pub calibration_fallback: PerPair<bool>,
}

impl CoincidenceCounts {
    pub fn c_drop_drop(&self) -> f64 {
        self.counts.drop_drop
    }

    pub fn c_thru_thru(&self) -> f64 {
        self.counts.thru_thru
    }

    pub fn c_thru_drop(&self) -> f64 {
        self.counts.thru_drop
    }

    pub fn c_drop_thru(&self) -> f64 {
        self.counts.drop_thru
    }

    /// Count in units of its standard deviation.
    pub fn significance(&self, pair: ChannelPair) -> f64 {
        let var = *self.variances.get(pair);
        let c = *self.counts.get(pair);
        if var > 0.0 {
            c / var.sqrt()
        } else if c > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Counts with Poisson variances and no background, for hand-built inputs.
    pub fn from_counts(dd: f64, tt: f64, td: f64, dt: f64) -> Self {
        let counts = PerPair {
            drop_drop: dd,
            thru_thru: tt,
            thru_drop: td,
            drop_thru: dt,
        };
        Self {
            counts,
            variances: counts,
            raw_peaks: counts,
            ..Default::default()
        }
    }
}

struct Extraction {
    raw: f64,
    accidentals: f64,
    variance: f64,
}

fn extract_one(hist: &CoincidenceHistogram, peak_window: f64) -> Extraction {
    let half_window = peak_window / 2.0 + 1e-9 * hist.bin_width;
    let side_edge = 1.5 * peak_window;
    let (mut raw, mut peak_bins) = (0.0, 0usize);
    let (mut side_sum, mut side_bins) = (0.0, 0usize);
    for (i, &c) in hist.counts.iter().enumerate() {
        let center = hist.bin_center(i).abs();
        if center <= half_window {
            raw += c as f64;
            peak_bins += 1;
        } else if center > side_edge {
            side_sum += c as f64;
            side_bins += 1;
        }
    }
    let mean = side_sum / side_bins as f64;
    let accidentals = mean * peak_bins as f64;
    // Var(peak) + Var(mean·n_peak) with Poisson bins.
    let variance = raw + accidentals * peak_bins as f64 / side_bins as f64;
    Extraction {
        raw,
        accidentals,
        variance,
    }
}

/// Peak-minus-accidentals counts. The peak sums bins with |Δt| ≤ window/2;
/// accidentals are the mean of bins with |Δt| > 1.5·window, scaled to the
/// number of peak bins.
pub fn extract_counts(histograms: &Histograms, peak_window: f64) -> Result<CoincidenceCounts> {
    let reference = &histograms.drop_drop;
    if !(peak_window >= reference.bin_width * (1.0 - 1e-9)) {
        return Err(Error::Domain(format!(
            "peak window {peak_window:.3e} s is narrower than one bin ({:.3e} s)",
            reference.bin_width
        )));
    }
    if 1.5 * peak_window >= reference.span {
        return Err(Error::Domain(format!(
            "peak window {peak_window:.3e} s leaves no accidental sidebands within the ±{:.3e} s span",
            reference.span
        )));
    }
    let parts = PerPair::from_fn(|pair| extract_one(histograms.get(pair), peak_window));
    let mut out = CoincidenceCounts::default();
    for pair in ChannelPair::ALL {
        let e = parts.get(pair);
        let diff = e.raw - e.accidentals;
        *out.counts.get_mut(pair) = diff.max(0.0);
        *out.floored.get_mut(pair) = diff < 0.0;
        *out.variances.get_mut(pair) = e.variance;
        *out.raw_peaks.get_mut(pair) = e.raw;
        *out.accidental_estimates.get_mut(pair) = e.accidentals;
    }
    Ok(out)
}

/// A coincidence-ratio estimate with its delta-method standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    pub eta: f64,
    pub std_error: f64,
}

/// `C_dd² / (C_dd + (C_td + C_dt)/2)²`. Through-through coincidences are left
/// out because bus-generated pairs land there.
pub fn eta_from_counts(counts: &CoincidenceCounts) -> Result<EtaEstimate> {
    let d = counts.c_drop_drop();
    let s = counts.c_thru_drop() + counts.c_drop_thru();
    let denom = d + s / 2.0;
    if !(denom > 0.0) {
        return Err(Error::UndefinedRatio(
            "no drop-drop or split coincidences to form a ratio".into(),
        ));
    }
    let x = d / denom;
    let var_d = counts.variances.drop_drop;
    let var_s = counts.variances.thru_drop + counts.variances.drop_thru;
    let dx_dd = (s / 2.0) / (denom * denom);
    let dx_ds = -(d / 2.0) / (denom * denom);
    let var_x = dx_dd * dx_dd * var_d + dx_ds * dx_ds * var_s;
    Ok(EtaEstimate {
        eta: x * x,
        std_error: 2.0 * x * var_x.sqrt(),
    })
}

/// Combine a run with one where the off-chip through and drop paths were
/// exchanged. Each category becomes the geometric mean of the two runs, which
/// cancels multiplicative path efficiencies. When one side is zero and the
/// other is not, the arithmetic mean is used and flagged.
pub fn path_swap_calibration(run_a: &CoincidenceCounts, run_b: &CoincidenceCounts) -> CoincidenceCounts {
    let mut out = CoincidenceCounts::default();
    for pair in ChannelPair::ALL {
        let (a, b) = (*run_a.counts.get(pair), *run_b.counts.get(pair));
        let (va, vb) = (*run_a.variances.get(pair), *run_b.variances.get(pair));
        let (count, var, fallback) = if a > 0.0 && b > 0.0 {
            let g = (a * b).sqrt();
            (g, (b / (4.0 * a)) * va + (a / (4.0 * b)) * vb, false)
        } else {
            ((a + b) / 2.0, (va + vb) / 4.0, a != b)
        };
        *out.counts.get_mut(pair) = count;
        *out.variances.get_mut(pair) = var;
        *out.calibration_fallback.get_mut(pair) = fallback;
        *out.raw_peaks.get_mut(pair) = (run_a.raw_peaks.get(pair) + run_b.raw_peaks.get(pair)) / 2.0;
        *out.accidental_estimates.get_mut(pair) =
            (run_a.accidental_estimates.get(pair) + run_b.accidental_estimates.get(pair)) / 2.0;
        *out.floored.get_mut(pair) = *run_a.floored.get(pair) || *run_b.floored.get(pair);
    }
    out
}
