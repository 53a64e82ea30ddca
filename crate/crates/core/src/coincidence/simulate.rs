//! Event-level simulation.
//!
//! The integration time is cut into shards of [`SHARD_DURATION`]; shard `k`
//! draws from `ChaCha8Rng::seed_from_u64(rng_seed)` on stream `k`. Shards are
//! histogrammed independently and summed, so the result depends only on the
//! config, never on how many worker threads ran the shards. Coincidences that
//! straddle a shard boundary are dropped, a relative loss of order
//! `span / SHARD_DURATION`.

use super::{Channel, ChannelPair, CoincidenceHistogram, ExperimentConfig, Histograms, PerPair};
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;

/// Length of one independently seeded slice of the integration time, seconds.
pub const SHARD_DURATION: f64 = 1.0;

struct Sampler<'a> {
    config: &'a ExperimentConfig,
    rng: ChaCha8Rng,
    jitter: Option<Normal<f64>>,
    events: [Vec<f64>; 4],
}

impl Sampler<'_> {
    fn detect(&mut self, channel: Channel, time: f64) {
        let survive = self.config.path_efficiencies[channel as usize] * self.config.detector_efficiency;
        if self.rng.random::<f64>() < survive {
            let t = match &self.jitter {
                Some(n) => time + n.sample(&mut self.rng),
                None => time,
            };
            self.events[channel as usize].push(t);
        }
    }

    fn route(&mut self) -> Option<bool> {
        let u: f64 = self.rng.random();
        if u < self.config.p_drop {
            Some(true)
        } else if u < self.config.p_drop + self.config.p_thru {
            Some(false)
        } else {
            None
        }
    }

    fn arrivals(&mut self, rate: f64, duration: f64) -> Vec<f64> {
        let mut times = Vec::new();
        if rate <= 0.0 {
            return times;
        }
        let exp = Exp::new(rate).expect("positive rate");
        let mut t = exp.sample(&mut self.rng);
        while t < duration {
            times.push(t);
            t += exp.sample(&mut self.rng);
        }
        times
    }
}

fn simulate_shard(config: &ExperimentConfig, shard: u64, duration: f64) -> PerPair<Vec<u64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    rng.set_stream(shard);
    let jitter = (config.timing_jitter_sigma > 0.0)
        .then(|| Normal::new(0.0, config.timing_jitter_sigma).expect("valid sigma"));
    let mut s = Sampler {
        config,
        rng,
        jitter,
        events: Default::default(),
    };

    for t in s.arrivals(config.pair_rate_ring, duration) {
        if let Some(drop) = s.route() {
            s.detect(if drop { Channel::DropSignal } else { Channel::ThruSignal }, t);
        }
        if let Some(drop) = s.route() {
            s.detect(if drop { Channel::DropIdler } else { Channel::ThruIdler }, t);
        }
    }
    for t in s.arrivals(config.pair_rate_bus_background, duration) {
        s.detect(Channel::ThruSignal, t);
        s.detect(Channel::ThruIdler, t);
    }
    for channel in Channel::ALL {
        let darks = s.arrivals(config.dark_count_rate, duration);
        s.events[channel as usize].extend(darks);
    }
    for e in &mut s.events {
        e.sort_by(f64::total_cmp);
    }

    let half = config.half_bins();
    PerPair::from_fn(|pair| {
        let (sig, idl) = pair.channels();
        correlate(&s.events[sig as usize], &s.events[idl as usize], config.bin_width, half)
    })
}

/// Histogram of `idler − signal` over all event pairs within the span.
fn correlate(signal: &[f64], idler: &[f64], bin_width: f64, half: usize) -> Vec<u64> {
    let mut counts = vec![0u64; 2 * half + 1];
    let reach = (half as f64 + 0.5) * bin_width;
    let mut start = 0;
    for &ts in signal {
        while start < idler.len() && idler[start] < ts - reach {
            start += 1;
        }
        for &ti in &idler[start..] {
            if ti > ts + reach {
                break;
            }
            let k = ((ti - ts) / bin_width).round() as i64 + half as i64;
            if (0..counts.len() as i64).contains(&k) {
                counts[k as usize] += 1;
            }
        }
    }
    counts
}

/// Simulate the four coincidence histograms for `config`.
pub fn simulate(config: &ExperimentConfig) -> Result<Histograms> {
    config.validate()?;
    let shards = (config.integration_time / SHARD_DURATION).ceil() as u64;
    let parts: Vec<PerPair<Vec<u64>>> = (0..shards)
        .into_par_iter()
        .map(|k| {
            let duration = (config.integration_time - k as f64 * SHARD_DURATION).min(SHARD_DURATION);
            simulate_shard(config, k, duration)
        })
        .collect();

    let half = config.half_bins();
    let mut out = PerPair::from_fn(|pair| CoincidenceHistogram::empty(pair, config.bin_width, half));
    for part in &parts {
        for pair in ChannelPair::ALL {
            let hist = out.get_mut(pair);
            for (acc, c) in hist.counts.iter_mut().zip(part.get(pair)) {
                *acc += c;
            }
        }
    }
    Ok(out)
}

/// The measurement repeated with the pump detuned from the ring: ring pairs
/// vanish while bus pairs and dark counts remain.
pub fn off_resonance_control(config: &ExperimentConfig) -> Result<Histograms> {
    simulate(&ExperimentConfig {
        pair_rate_ring: 0.0,
        ..*config
    })
}
