use ringsource::model::WavelengthGrid;
use ringsource::pair::relative_drop_pair_rate;
use ringsource::presets;
use ringsource::spectrum::find_resonances;
use ringsource::transfer::{device_spectrum, Excitation};
use ringsource::tuning::{grid_sweep, untuned, HeaterModel, PumpPlacement, TuningObjective, TuningResult};

fn tracking() -> TuningObjective {
    TuningObjective::new(
        TuningObjective::DEFAULT_WEIGHTS,
        PumpPlacement::TrackResonance {
            near: presets::PUMP_WAVELENGTH,
        },
    )
    .unwrap()
}

fn drop_rate(device: &ringsource::model::DeviceSpec, r: &TuningResult) -> f64 {
    let d = device.with_phases(r.phases);
    let g = r.diagnostics;
    relative_drop_pair_rate(&d, g.pump_wavelength, g.signal_wavelength, g.idler_wavelength).unwrap()
}

#[test]
fn half_circumference_dmzr_tunes_into_alternation() {
    // Sub-couplers sized so the fully crossed input MZI is critically coupled.
    let loss = 3000.0;
    let a_sq = 10f64.powf(-loss * 2.0 * std::f64::consts::PI * 15e-6 / 10.0);
    let k = (1.0 - a_sq.sqrt()) / 2.0;
    let d = presets::half_circumference_dmzr(15e-6, k, loss).unwrap();
    let h = HeaterModel::default();
    let o = tracking();
    let before = untuned(&d, &h, &o).unwrap();
    let after = grid_sweep(&d, &h, &o, 11).unwrap();
    assert!(
        after.diagnostics.pump_extinction_db > before.diagnostics.pump_extinction_db + 10.0,
        "{before:?}\n{after:?}"
    );

    let tuned = d.with_phases(after.phases);
    let grid = WavelengthGrid::centered(after.diagnostics.pump_wavelength, 40e-9, 40_000).unwrap();
    let input = find_resonances(&device_spectrum(&tuned, &grid, Excitation::Input).unwrap(), 1.0).unwrap();
    let add = find_resonances(&device_spectrum(&tuned, &grid, Excitation::Add).unwrap(), 1.0).unwrap();
    let flags = input.suppressed_flags();
    assert!(flags.len() >= 6 && flags.windows(2).all(|w| w[0] != w[1]), "{flags:?}");
    assert_eq!(input.len(), add.len());
    for (a, b) in input.entries.iter().zip(&add.entries) {
        assert_ne!(a.suppressed, b.suppressed);
    }
}

#[test]
fn table1_tuning_improves_extinction_and_drop_rate() {
    let d = presets::table1_dmzr().unwrap();
    let h = HeaterModel::default();
    let o = tracking();
    let before = untuned(&d, &h, &o).unwrap();
    let after = grid_sweep(&d, &h, &o, 11).unwrap();
    assert!(after.diagnostics.pump_extinction_db >= before.diagnostics.pump_extinction_db + 7.0);
    assert!(drop_rate(&d, &after) >= 2.0 * drop_rate(&d, &before));
    assert!(after.voltages.iter().all(|v| (0.0..=10.0).contains(v)));
}

#[test]
fn grid_sweep_ignores_thread_count() {
    let d = presets::table1_dmzr().unwrap();
    let h = HeaterModel::default();
    let o = tracking();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| grid_sweep(&d, &h, &o, 6).unwrap())
    };
    assert_eq!(run(1), run(3));
}
