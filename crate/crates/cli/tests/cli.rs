use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn ringsource(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringsource"))
        .args(args)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn with_config(args: &[&str], toml: &str, dir: &Path) -> Output {
    let path = dir.join("run.toml");
    std::fs::write(&path, toml).unwrap();
    let mut all: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    all.push("--config");
    all.push(&p);
    ringsource(&all, &dir.join("out"))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn flags(table: &Value) -> Vec<bool> {
    table
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["suppressed"].as_bool().unwrap())
        .collect()
}

#[test]
fn spectrum_symmetric_writes_two_spectra_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringsource(&["spectrum", "--preset", "symmetric"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["spectrum_input.csv", "spectrum_add.csv"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.starts_with("wavelength_nm,thru_power_db,drop_power_db,thru_phase_rad,drop_phase_rad\n"));
        assert!(!text.contains('\r'));
        assert_eq!(text.lines().count(), 30_002);
    }
    let summary = json(&dir.path().join("spectrum_summary.json"));
    assert!(summary["resonances"]["input"].as_array().unwrap().len() >= 4);
    let fsr = summary["fsr_nm"].as_f64().unwrap();
    // FSR = λ²/(n_g L) for an 18.5 µm ring.
    let expected = 1550.0f64.powi(2) / (4.2 * 2.0 * std::f64::consts::PI * 18.5e3);
    assert!((fsr - expected).abs() < 1e-3, "{fsr} vs {expected}");
}

#[test]
fn table1_untuned_supports_every_resonance_and_tuned_alternates() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringsource(&["spectrum", "--preset", "table1-dmzr"], dir.path());
    assert!(o.status.success());
    let summary = json(&dir.path().join("spectrum_summary.json"));
    for port in ["input", "add"] {
        let f = flags(&summary["resonances"][port]);
        assert!(f.len() >= 4 && f.iter().all(|s| !s), "{port}: {f:?}");
    }

    let o = ringsource(&["tune", "--preset", "table1-dmzr"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let tuning = json(&dir.path().join("tuning.json"));
    let input = flags(&tuning["resonances"]["after"]["input"]);
    let add = flags(&tuning["resonances"]["after"]["add"]);
    assert!(input.len() >= 4);
    assert!(input.windows(2).all(|w| w[0] != w[1]), "{input:?}");
    assert!(input.iter().zip(&add).all(|(a, b)| a != b), "{input:?} {add:?}");
    assert!(tuning["tuned"]["pump_drop_suppression_db"].as_f64().unwrap() >= 30.0);
    for name in ["spectrum_before_input.csv", "spectrum_after_add.csv"] {
        assert!(dir.path().join(name).exists());
    }
}

#[test]
fn figures_symmetric_reports_quarter() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringsource(&["figures", "--preset", "symmetric"], dir.path());
    assert!(o.status.success());
    let f = json(&dir.path().join("figures.json"));
    assert!((f["figures"]["eta_coinc"].as_f64().unwrap() - 0.25).abs() < 1e-12);
    assert!(f["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn figures_decoupled_drop_warns() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
[device]
radius_um = 18.5
[device.input_coupler]
kind = "point"
kappa_sq = 0.04
[device.output_coupler]
kind = "point"
kappa_sq = 0.0
"#;
    let o = with_config(&["figures"], toml, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = json(&dir.path().join("out/figures.json"));
    assert_eq!(f["figures"]["eta_coinc"].as_f64().unwrap(), 0.0);
    assert!(!f["warnings"].as_array().unwrap().is_empty());
}

#[test]
fn gap_family_lists_four_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringsource(&["figures", "--preset", "fig4-family"], dir.path());
    assert!(o.status.success());
    let text = std::fs::read_to_string(dir.path().join("gap_family.csv")).unwrap();
    let gaps: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(gaps, vec![150.0, 225.0, 300.0, 350.0]);
    let etas: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(etas.windows(2).all(|w| w[1] > w[0]), "{etas:?}");
}

#[test]
fn coinc_symmetric_estimate_matches_quarter() {
    let dir = tempfile::tempdir().unwrap();
    let o = ringsource(&["coinc", "--preset", "symmetric", "--seed", "4"], dir.path());
    assert!(o.status.success());
    let s = json(&dir.path().join("coinc_summary.json"));
    let eta = s["eta"]["eta"].as_f64().unwrap();
    let se = s["eta"]["std_error"].as_f64().unwrap();
    assert!((eta - 0.25).abs() <= 3.0 * se, "{eta} ± {se}");
    assert_eq!(s["seeds"]["main"].as_u64(), Some(4));
    assert!(dir.path().join("hist_drop_drop.csv").exists());
}

#[test]
fn coinc_off_resonance_control_leaves_through_peak() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
[coinc]
pair_rate_bus_background_hz = 5000
dark_count_rate_hz = 1000
timing_jitter_ps = 30
path_efficiencies = [0.6, 0.6, 0.6, 0.6]
detector_efficiency = 0.8
off_resonance_control = true
path_swap = true
"#;
    let o = with_config(&["coinc", "--preset", "symmetric"], toml, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(&dir.path().join("out/coinc_summary.json"));
    let sig = &s["off_resonance"]["significance"];
    assert!(sig["thru_thru"].as_f64().unwrap() > 5.0);
    for pair in ["drop_drop", "thru_drop", "drop_thru"] {
        assert!(sig[pair].as_f64().unwrap() < 2.0, "{pair}: {}", sig[pair]);
    }
    for name in ["hist_thru_thru_off_resonance.csv", "hist_drop_drop_swapped.csv"] {
        assert!(dir.path().join("out").join(name).exists());
    }
    let seeds = &s["seeds"];
    assert!(seeds["path_swapped"].is_u64() && seeds["off_resonance"].is_u64());
}

#[test]
fn coinc_zero_rate_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config(
        &["coinc", "--preset", "symmetric"],
        "[coinc]\npair_rate_ring_hz = 0.0\nintegration_time_s = 2\n",
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("undefined"));
    let text = std::fs::read_to_string(dir.path().join("out/hist_drop_drop.csv")).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn tune_from_tuned_point_stays_put() {
    let dir = tempfile::tempdir().unwrap();
    let first = ringsource(&["tune", "--preset", "table1-dmzr"], &dir.path().join("a"));
    assert!(first.status.success());
    let tuned = json(&dir.path().join("a/tuning.json"));
    let v: Vec<f64> = tuned["tuned"]["voltages_v"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let toml = format!("[tune]\nstart_voltages_v = [{:e}, {:e}, {:e}]\n", v[0], v[1], v[2]);
    let o = with_config(&["tune", "--preset", "table1-dmzr"], &toml, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = json(&dir.path().join("out/tuning.json"));
    let tol = again["tolerance_rad"].as_f64().unwrap();
    let before = tuned["tuned"]["phases_rad"].as_array().unwrap();
    let after = again["tuned"]["phases_rad"].as_array().unwrap();
    for (a, b) in before.iter().zip(after) {
        assert!((a.as_f64().unwrap() - b.as_f64().unwrap()).abs() <= tol, "{a} vs {b}");
    }
}

#[test]
fn tune_zero_weights_fails_before_compute() {
    let dir = tempfile::tempdir().unwrap();
    let o = with_config(&["tune", "--preset", "table1-dmzr"], "[tune]\nweights = [0, 0, 0]\n", dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out/tuning.json").exists());
}

#[test]
fn schema_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let toml = r#"
[device]
radius_um = 18.5
[device.input_coupler]
kind = "mzi"
sub_coupler_a = { kappa_sq = 0.1 }
sub_coupler_b = { kappa_sq = 0.1 }
bus_arm_um = -3
ring_arm_um = 20
[device.output_coupler]
kind = "point"
kappa_sq = 0.1
"#;
    let o = with_config(&["spectrum"], toml, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("device.input_coupler.bus_arm_um"));

    let o = ringsource(&["spectrum", "--preset", "nonesuch"], &dir.path().join("x"));
    assert_eq!(o.status.code(), Some(2));
    let o = ringsource(&["spectrum"], &dir.path().join("y"));
    assert_eq!(o.status.code(), Some(2));
}
