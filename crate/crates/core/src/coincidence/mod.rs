//! Monte Carlo model of a four-detector coincidence measurement on the
//! through and drop ports, and the estimators applied to its histograms.

mod estimate;
mod simulate;

pub use estimate::{eta_from_counts, extract_counts, path_swap_calibration, CoincidenceCounts, EtaEstimate};
pub use simulate::{off_resonance_control, simulate, SHARD_DURATION};

use crate::error::{Error, Result};

/// Detection channels, in the order used by [`ExperimentConfig::path_efficiencies`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    ThruSignal = 0,
    ThruIdler = 1,
    DropSignal = 2,
    DropIdler = 3,
}

impl Channel {
    pub const ALL: [Channel; 4] = [
        Channel::ThruSignal,
        Channel::ThruIdler,
        Channel::DropSignal,
        Channel::DropIdler,
    ];
}

/// Signal-channel × idler-channel combinations that are histogrammed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelPair {
    DropDrop,
    ThruThru,
    ThruDrop,
    DropThru,
}

impl ChannelPair {
    pub const ALL: [ChannelPair; 4] = [
        ChannelPair::DropDrop,
        ChannelPair::ThruThru,
        ChannelPair::ThruDrop,
        ChannelPair::DropThru,
    ];

    /// (signal channel, idler channel).
    pub fn channels(&self) -> (Channel, Channel) {
        match self {
            ChannelPair::DropDrop => (Channel::DropSignal, Channel::DropIdler),
            ChannelPair::ThruThru => (Channel::ThruSignal, Channel::ThruIdler),
            ChannelPair::ThruDrop => (Channel::ThruSignal, Channel::DropIdler),
            ChannelPair::DropThru => (Channel::DropSignal, Channel::ThruIdler),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ChannelPair::DropDrop => "drop_drop",
            ChannelPair::ThruThru => "thru_thru",
            ChannelPair::ThruDrop => "thru_drop",
            ChannelPair::DropThru => "drop_thru",
        }
    }
}

/// One value per histogrammed channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerPair<T> {
    pub drop_drop: T,
    pub thru_thru: T,
    pub thru_drop: T,
    pub drop_thru: T,
}

impl<T> PerPair<T> {
    pub fn from_fn(mut f: impl FnMut(ChannelPair) -> T) -> Self {
        Self {
            drop_drop: f(ChannelPair::DropDrop),
            thru_thru: f(ChannelPair::ThruThru),
            thru_drop: f(ChannelPair::ThruDrop),
            drop_thru: f(ChannelPair::DropThru),
        }
    }

    pub fn get(&self, pair: ChannelPair) -> &T {
        match pair {
            ChannelPair::DropDrop => &self.drop_drop,
            ChannelPair::ThruThru => &self.thru_thru,
            ChannelPair::ThruDrop => &self.thru_drop,
            ChannelPair::DropThru => &self.drop_thru,
        }
    }

    pub fn get_mut(&mut self, pair: ChannelPair) -> &mut T {
        match pair {
            ChannelPair::DropDrop => &mut self.drop_drop,
            ChannelPair::ThruThru => &mut self.thru_thru,
            ChannelPair::ThruDrop => &mut self.thru_drop,
            ChannelPair::DropThru => &mut self.drop_thru,
        }
    }
}

/// Parameters of one simulated measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    /// Pairs per second generated inside the ring.
    pub pair_rate_ring: f64,
    /// Pairs per second generated in the input bus; both photons leave
    /// through the through port.
    pub pair_rate_bus_background: f64,
    /// Probability that a ring photon exits the drop port.
    pub p_drop: f64,
    /// Probability that a ring photon exits the through port. Any remainder
    /// up to 1 is lost inside the ring.
    pub p_thru: f64,
    /// Transmission of each off-chip path, indexed by [`Channel`].
    pub path_efficiencies: [f64; 4],
    pub detector_efficiency: f64,
    /// Dark counts per second on each detector.
    pub dark_count_rate: f64,
    pub timing_jitter_sigma: f64,
    pub bin_width: f64,
    /// Histograms cover Δt in [−span, +span].
    pub span: f64,
    pub integration_time: f64,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    /// Lossless routing, ideal detection, 81 ps bins over ±10 ns.
    pub fn ideal(pair_rate_ring: f64, p_drop: f64, integration_time: f64, rng_seed: u64) -> Self {
        Self {
            pair_rate_ring,
            pair_rate_bus_background: 0.0,
            p_drop,
            p_thru: 1.0 - p_drop,
            path_efficiencies: [1.0; 4],
            detector_efficiency: 1.0,
            dark_count_rate: 0.0,
            timing_jitter_sigma: 0.0,
            bin_width: 81e-12,
            span: 10e-9,
            integration_time,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("pair_rate_ring", self.pair_rate_ring),
            ("pair_rate_bus_background", self.pair_rate_bus_background),
            ("dark_count_rate", self.dark_count_rate),
            ("timing_jitter_sigma", self.timing_jitter_sigma),
            ("integration_time", self.integration_time),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for (name, v) in [("p_drop", self.p_drop), ("p_thru", self.p_thru)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.p_drop + self.p_thru > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "p_drop + p_thru = {} exceeds 1",
                self.p_drop + self.p_thru
            )));
        }
        for (i, &e) in self.path_efficiencies.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Config(format!("path_efficiencies[{i}] must lie in (0, 1], got {e}")));
            }
        }
        if !(0.0..=1.0).contains(&self.detector_efficiency) {
            return Err(Error::Config(format!(
                "detector_efficiency must lie in [0, 1], got {}",
                self.detector_efficiency
            )));
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return Err(Error::Config(format!("bin_width must be positive, got {}", self.bin_width)));
        }
        if !(self.span >= self.bin_width && self.span.is_finite()) {
            return Err(Error::Config(format!(
                "span {} must be at least one bin width {}",
                self.span, self.bin_width
            )));
        }
        Ok(())
    }

    /// The same measurement with the off-chip through and drop paths exchanged.
    pub fn path_swapped(&self) -> Self {
        let [ts, ti, ds, di] = self.path_efficiencies;
        Self {
            path_efficiencies: [ds, di, ts, ti],
            ..*self
        }
    }

    /// Number of histogram bins on each side of Δt = 0.
    pub fn half_bins(&self) -> usize {
        (self.span / self.bin_width + 1e-9).floor() as usize
    }
}

/// Counts of Δt = t_idler − t_signal in bins centred on multiples of the bin width.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub channel_pair: ChannelPair,
    pub bin_width: f64,
    pub span: f64,
    pub counts: Vec<u64>,
}

impl CoincidenceHistogram {
    pub fn empty(channel_pair: ChannelPair, bin_width: f64, half_bins: usize) -> Self {
        Self {
            channel_pair,
            bin_width,
            span: half_bins as f64 * bin_width,
            counts: vec![0; 2 * half_bins + 1],
        }
    }

    pub fn half_bins(&self) -> usize {
        self.counts.len() / 2
    }

    pub fn bin_center(&self, index: usize) -> f64 {
        (index as f64 - self.half_bins() as f64) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub type Histograms = PerPair<CoincidenceHistogram>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_span_has_247_bins() {
        let c = ExperimentConfig::ideal(0.0, 0.5, 1.0, 0);
        let h = CoincidenceHistogram::empty(ChannelPair::DropDrop, c.bin_width, c.half_bins());
        assert_eq!(h.counts.len(), 247);
        assert_eq!(h.bin_center(123), 0.0);
    }

    #[test]
    fn swap_exchanges_paths() {
        let mut c = ExperimentConfig::ideal(1.0, 0.5, 1.0, 0);
        c.path_efficiencies = [1.0, 0.5, 0.9, 0.7];
        assert_eq!(c.path_swapped().path_efficiencies, [0.9, 0.7, 1.0, 0.5]);
        assert_eq!(c.path_swapped().path_swapped(), c);
    }

    #[test]
    fn invalid_configs_rejected() {
        let good = ExperimentConfig::ideal(1.0, 0.5, 1.0, 0);
        assert!(good.validate().is_ok());
        assert!(ExperimentConfig { bin_width: 0.0, ..good }.validate().is_err());
        assert!(ExperimentConfig { pair_rate_ring: -1.0, ..good }.validate().is_err());
        assert!(ExperimentConfig { p_drop: 0.8, p_thru: 0.5, ..good }.validate().is_err());
        assert!(ExperimentConfig { path_efficiencies: [0.0, 1.0, 1.0, 1.0], ..good }.validate().is_err());
    }
}
