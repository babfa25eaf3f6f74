#![allow(dead_code)]

use freespace::constants::mhz_to_rad;
use freespace::fitting::DataRow;
use freespace::photon::{generate_run, transmission_rows, DetectorConfig, PulseConfig};
use freespace::spectra::LineshapeParams;

/// Truth of the measured transmission dip: Γ/2π = 6.9 MHz, δω/2π = 48.03 MHz,
/// Λ = 4.67 %, φ = 0.13.
pub fn dip_truth() -> LineshapeParams {
    LineshapeParams::matched(mhz_to_rad(6.9), mhz_to_rad(48.03), 0.0467, 0.13)
}

/// 20 ms pulses of 550 photons, 6000 per point, 41 points from 28 to 68 MHz.
pub fn dip_pulse() -> PulseConfig {
    PulseConfig {
        duration: 20e-3,
        mean_incident_photons: 550.0,
        detunings: (28..=68).map(|d| mhz_to_rad(d as f64)).collect(),
        bin_width: 20e-3,
        repetitions: 6000,
    }
}

/// One synthetic transmission spectrum at measurement statistics.
pub fn dip_spectrum(seed: u64) -> Vec<DataRow> {
    let det = DetectorConfig::experiment();
    let run = generate_run(&dip_truth(), None, &dip_pulse(), &det, seed).unwrap();
    let (rows, excluded) = transmission_rows(&run, &det);
    assert_eq!(excluded, 0);
    rows
}

pub fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}
