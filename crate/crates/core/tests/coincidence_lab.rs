use ringsource::coincidence::{
    eta_from_counts, extract_counts, off_resonance_control, path_swap_calibration, simulate, ChannelPair,
    ExperimentConfig,
};
use ringsource::pair::{coincidence_ratio, p_drop};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const WINDOW: f64 = 3.0 * 81e-12;

fn ring_only(t1_sq: f64, t2_sq: f64, min_dd: f64, seed: u64) -> ExperimentConfig {
    let p = p_drop(t1_sq, t2_sq).unwrap();
    let rate = 20_000.0;
    let pairs = min_dd / (p * p);
    ExperimentConfig::ideal(rate, p, (pairs / rate).ceil(), seed)
}

#[test]
fn estimator_matches_closed_form() {
    for (i, &(t1, t2)) in [(0.5, 0.5), (0.9, 0.5), (0.99, 0.5)].iter().enumerate() {
        let config = ring_only(t1, t2, 1.2e4, 11 + i as u64);
        let counts = extract_counts(&simulate(&config).unwrap(), WINDOW).unwrap();
        assert!(counts.c_drop_drop() >= 1e4);
        let est = eta_from_counts(&counts).unwrap();
        let truth = coincidence_ratio(t1, t2).unwrap();
        assert!(
            (est.eta - truth).abs() <= 3.0 * est.std_error,
            "({t1}, {t2}): {} ± {} vs {truth}",
            est.eta,
            est.std_error
        );
    }
}

#[test]
fn category_totals_follow_multinomial_split() {
    let p = 0.7;
    let config = ExperimentConfig::ideal(20_000.0, p, 4.0, 5);
    let h = simulate(&config).unwrap();
    let center = h.drop_drop.half_bins();
    let observed = [
        h.drop_drop.counts[center] as f64,
        (h.thru_drop.counts[center] + h.drop_thru.counts[center]) as f64,
        h.thru_thru.counts[center] as f64,
    ];
    let total: f64 = observed.iter().sum();
    let probs = [p * p, 2.0 * p * (1.0 - p), (1.0 - p) * (1.0 - p)];
    let chi2: f64 = observed
        .iter()
        .zip(probs)
        .map(|(o, q)| (o - total * q).powi(2) / (total * q))
        .sum();
    let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "χ² = {chi2}");
}

fn darks_only(rate: f64, bin_width: f64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dark_count_rate: rate,
        bin_width,
        ..ExperimentConfig::ideal(0.0, 0.5, 20.0, seed)
    }
}

#[test]
fn accidental_floor_is_flat_poisson() {
    let rate = 50_000.0;
    let config = darks_only(rate, 81e-12, 21);
    let hist = simulate(&config).unwrap().drop_drop;
    let expected = rate * rate * config.bin_width * config.integration_time;
    let chi2: f64 = hist
        .counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dof = hist.counts.len() as f64;
    let p_value = 1.0 - ChiSquared::new(dof).unwrap().cdf(chi2);
    assert!(p_value > 0.01, "χ² = {chi2} over {dof} bins");
    let mean = hist.total() as f64 / dof;
    assert!((mean - expected).abs() < 3.0 * (expected / dof).sqrt());
}

#[test]
fn accidental_floor_scales_linearly() {
    let mean_floor = |c: &ExperimentConfig| {
        let h = simulate(c).unwrap().thru_drop;
        h.total() as f64 / h.counts.len() as f64
    };
    let base = darks_only(40_000.0, 81e-12, 3);
    let wide = darks_only(40_000.0, 162e-12, 3);
    let brighter = darks_only(40_000.0 * 2f64.sqrt(), 81e-12, 4);
    let b = mean_floor(&base);
    let rel_err = 3.0 / (b * base.half_bins() as f64 * 2.0).sqrt();
    assert!((mean_floor(&wide) / b - 2.0).abs() < 2.0 * 2.0 * rel_err);
    assert!((mean_floor(&brighter) / b - 2.0).abs() < 2.0 * 2.0 * rel_err);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut config = ExperimentConfig::ideal(30_000.0, 0.8, 6.5, 77);
    config.dark_count_rate = 3_000.0;
    config.timing_jitter_sigma = 40e-12;
    config.pair_rate_bus_background = 2_000.0;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| simulate(&config).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn path_swap_removes_efficiency_bias() {
    let p = 0.8;
    let mut config = ExperimentConfig::ideal(40_000.0, p, 10.0, 31);
    config.path_efficiencies = [1.0, 0.5, 0.9, 0.7];
    let a = extract_counts(&simulate(&config).unwrap(), WINDOW).unwrap();
    let swapped = ExperimentConfig {
        rng_seed: 32,
        ..config.path_swapped()
    };
    let b = extract_counts(&simulate(&swapped).unwrap(), WINDOW).unwrap();
    let calibrated = eta_from_counts(&path_swap_calibration(&a, &b)).unwrap();
    let raw = eta_from_counts(&a).unwrap();
    let truth = p * p;
    assert!((calibrated.eta - truth).abs() <= 3.0 * calibrated.std_error, "{calibrated:?}");
    assert!((raw.eta - truth).abs() > 3.0 * raw.std_error, "{raw:?}");
}

fn with_background(seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::ideal(20_000.0, 0.8, 10.0, seed);
    c.pair_rate_bus_background = 5_000.0;
    c.dark_count_rate = 1_000.0;
    c.timing_jitter_sigma = 30e-12;
    c.path_efficiencies = [0.6, 0.6, 0.6, 0.6];
    c.detector_efficiency = 0.8;
    c
}

#[test]
fn off_resonance_leaves_only_through_coincidences() {
    let config = with_background(8);
    let off = extract_counts(&off_resonance_control(&config).unwrap(), WINDOW).unwrap();
    assert!(off.significance(ChannelPair::ThruThru) > 5.0);
    for pair in [ChannelPair::DropDrop, ChannelPair::ThruDrop, ChannelPair::DropThru] {
        assert!(off.significance(pair) < 2.0, "{pair:?}: {}", off.significance(pair));
    }
}

#[test]
fn off_resonance_through_peak_matches_bus_contribution() {
    let config = with_background(9);
    let on = extract_counts(&simulate(&config).unwrap(), WINDOW).unwrap();
    let off = extract_counts(&off_resonance_control(&config).unwrap(), WINDOW).unwrap();
    // On resonance the through peak also holds ring pairs routed thru-thru.
    let survive = 0.6 * 0.8;
    let ring_tt = config.pair_rate_ring * 0.2 * 0.2 * survive * survive * config.integration_time;
    let bus_on = on.c_thru_thru() - ring_tt;
    let sigma = (on.variances.thru_thru + off.variances.thru_thru + ring_tt).sqrt();
    assert!((bus_on - off.c_thru_thru()).abs() < 3.0 * sigma);
}

#[test]
fn zero_rate_run_has_no_ratio() {
    let config = ExperimentConfig::ideal(0.0, 0.5, 2.0, 1);
    let counts = extract_counts(&simulate(&config).unwrap(), WINDOW).unwrap();
    assert!(eta_from_counts(&counts).is_err());
}
