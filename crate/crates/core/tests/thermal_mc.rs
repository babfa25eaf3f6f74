//! Monte-Carlo statistics and determinism of the thermal model.

mod common;

use freespace::config::RunConfig;
use freespace::constants::{mhz_to_rad, K_B};
use freespace::spectra::transmission_at;
use freespace::thermal::{
    heated_pulse_transmission, heating_sweep, positional_sigma, recoil_heat, sample_positions,
    thermal_average_transmission, ThermalState,
};

fn setup() -> freespace::config::Resolved {
    RunConfig::default().resolve().unwrap()
}

fn grid() -> Vec<f64> {
    (36..=58).map(|d| mhz_to_rad(d as f64)).collect()
}

#[test]
fn position_moments_match_trap() {
    let r = setup();
    let state = ThermalState::isotropic(21e-6);
    let n = 200_000;
    let pos = sample_positions(&state, &r.trap, &r.species, n, 12).unwrap();
    for axis in 0..3 {
        let sigma = positional_sigma(21e-6, r.trap.frequencies[axis], r.species.mass);
        let mean = pos.iter().map(|p| p[axis]).sum::<f64>() / n as f64;
        let var = pos.iter().map(|p| (p[axis] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt(), "axis {axis} mean {mean}");
        let var_se = sigma * sigma * (2.0 / n as f64).sqrt();
        assert!((var - sigma * sigma).abs() < 4.0 * var_se, "axis {axis}: {var} vs {}", sigma * sigma);
    }
    let cov_xz = pos.iter().map(|p| p[0] * p[2]).sum::<f64>() / n as f64;
    let sx = positional_sigma(21e-6, r.trap.frequencies[0], r.species.mass);
    let sz = positional_sigma(21e-6, r.trap.frequencies[2], r.species.mass);
    assert!(cov_xz.abs() < 4.0 * sx * sz / (n as f64).sqrt());
}

#[test]
fn samples_depend_only_on_index() {
    let r = setup();
    let state = ThermalState::isotropic(50e-6);
    let short = sample_positions(&state, &r.trap, &r.species, 100, 3).unwrap();
    let long = sample_positions(&state, &r.trap, &r.species, 5000, 3).unwrap();
    assert_eq!(&long[..100], &short[..]);
}

#[test]
fn result_independent_of_worker_count() {
    let r = setup();
    let model = r.thermal_model();
    let state = ThermalState::isotropic(21e-6);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| thermal_average_transmission(&state, &model, &grid(), 20_000, 99).unwrap())
    };
    let one = run(1);
    for threads in [2, 3, 8] {
        let other = run(threads);
        assert_eq!(
            one.mean_transmission.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            other.mean_transmission.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(one.mc_standard_error, other.mc_standard_error);
    }
}

#[test]
fn standard_error_shrinks_with_samples() {
    let r = setup();
    let model = r.thermal_model();
    let state = ThermalState::isotropic(21e-6);
    let small = thermal_average_transmission(&state, &model, &grid(), 10_000, 1).unwrap();
    let large = thermal_average_transmission(&state, &model, &grid(), 40_000, 1).unwrap();
    for k in 0..grid().len() {
        let ratio = large.mc_standard_error[k] / small.mc_standard_error[k];
        assert!((ratio - 0.5).abs() < 0.08, "{k}: {ratio}");
    }
    // independent seeds agree within their combined error
    let other = thermal_average_transmission(&state, &model, &grid(), 40_000, 2).unwrap();
    for k in 0..grid().len() {
        let se = (large.mc_standard_error[k].powi(2) + other.mc_standard_error[k].powi(2)).sqrt();
        assert!((large.mean_transmission[k] - other.mean_transmission[k]).abs() < 5.0 * se);
    }
}

#[test]
fn very_cold_atom_approaches_stationary_spectrum() {
    let r = setup();
    let model = r.thermal_model();
    let avg = thermal_average_transmission(&ThermalState::isotropic(1e-12), &model, &grid(), 4096, 5).unwrap();
    for (d, t) in grid().iter().zip(&avg.mean_transmission) {
        assert!((t - transmission_at(&r.base, *d)).abs() < 1e-6);
    }
}

#[test]
fn heating_conserves_energy_ledger() {
    let r = setup();
    let mut state = ThermalState { temperatures: [21e-6, 30e-6, 5e-6], photons_scattered: 0 };
    let e0 = state.energy();
    for n in [1u64, 7, 100, 392] {
        state = recoil_heat(&state, n, &r.species);
    }
    assert_eq!(state.photons_scattered, 500);
    let gained = state.energy() - e0;
    assert!((gained - 1000.0 * r.species.recoil_energy).abs() < 1e-12 * gained);
    let dt_z = state.temperatures[2] - 5e-6;
    assert!((dt_z - 500.0 * 4.0 / 3.0 * r.species.recoil_energy / K_B).abs() < 1e-15);
}

#[test]
fn empty_heating_schedule_gives_flat_table() {
    let r = setup();
    let model = r.thermal_model();
    let points = heating_sweep(&r.thermal, &model, &[0, 0, 0], &grid(), 20_000, 4).unwrap();
    assert_eq!(points.len(), 3);
    assert!(points.iter().all(|p| p == &points[0]));
    assert!(points[0].fit.is_some());
}

#[test]
fn decreasing_schedule_rejected() {
    let r = setup();
    let model = r.thermal_model();
    assert!(heating_sweep(&r.thermal, &model, &[0, 100, 50], &grid(), 1000, 4).is_err());
}

#[test]
fn self_heating_pulse_loses_contrast_on_resonance() {
    let r = setup();
    let model = r.thermal_model();
    let resonance = [mhz_to_rad(46.7)];
    let table = heated_pulse_transmission(&r.thermal, &model, &resonance, 80, 9000.0 / 80.0, 20_000, 8).unwrap();
    let row = &table[0];
    assert_eq!(row.len(), 80);
    assert!(row[79] > row[0] + 0.05, "{} -> {}", row[0], row[79]);
    // a frozen start with no light stays frozen
    let frozen = heated_pulse_transmission(&ThermalState::isotropic(0.0), &model, &resonance, 5, 0.0, 100, 8).unwrap();
    assert!(frozen[0].iter().all(|t| *t == frozen[0][0]));
}

#[test]
fn resonant_extinction_degrades_with_temperature() {
    let r = setup();
    let model = r.thermal_model();
    let resonance = [r.base.shift];
    let mut prev: Option<(f64, f64)> = None;
    for t_uk in [0.0, 20.0, 50.0, 100.0, 150.0] {
        let s = thermal_average_transmission(&ThermalState::isotropic(t_uk * 1e-6), &model, &resonance, 100_000, 9).unwrap();
        let (eps, se) = (1.0 - s.mean_transmission[0], s.mc_standard_error[0]);
        if let Some((e0, se0)) = prev {
            assert!(eps <= e0 + 3.0 * (se * se + se0 * se0).sqrt(), "{t_uk} µK: {eps} after {e0}");
        }
        prev = Some((eps, se));
    }
}

#[test]
fn sweep_extinction_is_nonincreasing() {
    let r = setup();
    let model = r.thermal_model();
    let schedule: Vec<u64> = (0..17).map(|i| 30 * i).collect();
    let points = heating_sweep(&r.thermal, &model, &schedule, &r.pulse.detunings, 20_000, 2).unwrap();
    let eps: Vec<f64> = points.iter().map(|p| p.fit.as_ref().unwrap().extinction).collect();
    let violations = eps.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(violations <= 2, "{eps:?}");
}
