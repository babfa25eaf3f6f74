//! Classical thermal motion of the trapped atom: harmonic-trap position
//! spread, recoil heating, and Monte-Carlo averaged transmission spectra.
//!
//! The atom is represented by static position snapshots drawn from the
//! Maxwell–Boltzmann distribution of a harmonic trap, with independent
//! Gaussian spreads σ_i = √(k_B T_i / m ω_i²) per axis. Each snapshot sees a
//! local overlap Λ(r) and a local resonance shift δω(r) = ω_z + ω_ac(r); the
//! averaged spectrum is the mean of the per-snapshot transmission.

use nalgebra::Vector3;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::K_B;
use crate::error::{Error, Result};
use crate::fitting::{self, FitProblem, FitResult, TransmissionModel};
use crate::optics::{ac_stark_shift, spatial_overlap, AtomSpecies, FieldShifts, FocalSpot};
use crate::rng::{self, Domain};
use crate::spectra::{dip_extinction, transmission_at, LineshapeParams};

/// Samples per parallel work unit. Fixed so that summation order is
/// independent of the number of workers.
const CHUNK: usize = 2048;

/// Per-photon recoil energy deposited along x, y, z in units of E_r.
/// The axial axis (z) is the probe propagation direction.
pub const RECOIL_SPLIT: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 4.0 / 3.0];

/// Uniform ordinate uncertainty used when fitting Monte-Carlo spectra.
pub const SWEEP_FIT_SIGMA: f64 = 1e-3;

/// Red-detuned Gaussian dipole trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// U0, J
    pub depth: f64,
    /// ω_x, ω_y, ω_z, rad/s
    pub frequencies: [f64; 3],
    /// m
    pub waist: f64,
    /// m
    pub wavelength: f64,
}

impl TrapConfig {
    /// 852 nm trap with U0 = k_B·2.22 mK and ω/2π = (107, 124, 13.8) kHz.
    pub fn experiment() -> Self {
        use crate::constants::khz_to_rad;
        Self {
            depth: K_B * 2.22e-3,
            frequencies: [khz_to_rad(107.0), khz_to_rad(124.0), khz_to_rad(13.8)],
            waist: 1.4e-6,
            wavelength: 852e-9,
        }
    }

    pub fn rayleigh_range(&self) -> f64 {
        std::f64::consts::PI * self.waist * self.waist / self.wavelength
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.depth > 0.0) {
            return Err(Error::domain("trap depth must be positive"));
        }
        if self.frequencies.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::domain("trap frequencies must be positive"));
        }
        if !(self.waist > 0.0) || !(self.wavelength > 0.0) {
            return Err(Error::domain("trap waist and wavelength must be positive"));
        }
        Ok(())
    }
}

/// Per-axis temperatures and the running count of scattered photons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    /// T_x, T_y, T_z, K
    pub temperatures: [f64; 3],
    pub photons_scattered: u64,
}

impl ThermalState {
    pub fn isotropic(temperature: f64) -> Self {
        Self {
            temperatures: [temperature; 3],
            photons_scattered: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.temperatures.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(Error::domain(format!(
                "temperatures must be finite and non-negative, got {:?}",
                self.temperatures
            )));
        }
        Ok(())
    }

    /// Total thermal energy Σ k_B T_i.
    pub fn energy(&self) -> f64 {
        K_B * self.temperatures.iter().sum::<f64>()
    }

    fn is_frozen(&self) -> bool {
        self.temperatures.iter().all(|t| *t == 0.0)
    }
}

/// Thermally averaged transmission on a detuning grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSpectrum {
    /// ω_p − ω0, rad/s
    pub detunings: Vec<f64>,
    pub mean_transmission: Vec<f64>,
    pub mc_standard_error: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

impl SampledSpectrum {
    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }
}

/// Positional standard deviation σ = √(k_B T / m ω²).
pub fn positional_sigma(temperature: f64, trap_frequency: f64, mass: f64) -> f64 {
    (K_B * temperature / (mass * trap_frequency * trap_frequency)).sqrt()
}

fn sigmas(state: &ThermalState, trap: &TrapConfig, mass: f64) -> [f64; 3] {
    std::array::from_fn(|i| positional_sigma(state.temperatures[i], trap.frequencies[i], mass))
}

#[inline]
fn draw_position(seed: u64, index: u64, sigma: &[f64; 3]) -> Vector3<f64> {
    let mut rng = rng::stream(seed, Domain::Positions, index);
    let x: f64 = StandardNormal.sample(&mut rng);
    let y: f64 = StandardNormal.sample(&mut rng);
    let z: f64 = StandardNormal.sample(&mut rng);
    Vector3::new(sigma[0] * x, sigma[1] * y, sigma[2] * z)
}

/// Draws `n` atom positions from the thermal distribution. Sample `i`
/// depends only on `(seed, i)`.
pub fn sample_positions(
    state: &ThermalState,
    trap: &TrapConfig,
    species: &AtomSpecies,
    n: usize,
    seed: u64,
) -> Result<Vec<Vector3<f64>>> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    state.validate()?;
    let sigma = sigmas(state, trap, species.mass);
    Ok((0..n as u64)
        .into_par_iter()
        .map(|i| draw_position(seed, i, &sigma))
        .collect())
}

/// Deposits the recoil energy of `n_photons` scattered photons: 2E_r per
/// photon, split (1/3, 1/3, 4/3)E_r over (x, y, z). Each axis holds total
/// energy k_B T_i, so ΔT_i = ΔE_i / k_B.
pub fn recoil_heat(state: &ThermalState, n_photons: u64, species: &AtomSpecies) -> ThermalState {
    let mut next = *state;
    if n_photons == 0 {
        return next;
    }
    let n = n_photons as f64;
    for (t, share) in next.temperatures.iter_mut().zip(RECOIL_SPLIT) {
        *t += n * share * species.recoil_energy / K_B;
    }
    next.photons_scattered += n_photons;
    next
}

/// Heats by a possibly fractional number of photons, for use with expected
/// scattering ledgers. `photons_scattered` is left unchanged.
pub fn recoil_heat_expected(state: &ThermalState, photons: f64, species: &AtomSpecies) -> ThermalState {
    let mut next = *state;
    for (t, share) in next.temperatures.iter_mut().zip(RECOIL_SPLIT) {
        *t += photons * share * species.recoil_energy / K_B;
    }
    next
}

/// Reduced interaction strength Λ_eff = (1 − α)Λ.
pub fn effective_overlap(overlap: f64, alpha: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("reduction α = {alpha} is outside [0, 1]")));
    }
    Ok((1.0 - alpha) * overlap)
}

/// Everything the averaged spectrum depends on besides temperature.
#[derive(Debug, Clone, Copy)]
pub struct ThermalModel<'a> {
    pub species: &'a AtomSpecies,
    pub trap: &'a TrapConfig,
    pub probe_focus: &'a FocalSpot,
    pub shifts: &'a FieldShifts,
    /// Lineshape of an atom at the trap center. Its `overlap` is Λ at the
    /// focus; its `shift` is replaced by ω_z + ω_ac(r) for each snapshot.
    pub base: &'a LineshapeParams,
}

impl ThermalModel<'_> {
    /// Lineshape seen by an atom at `r`.
    pub fn local_params(&self, r: &Vector3<f64>) -> LineshapeParams {
        let overlap = spatial_overlap(r, self.probe_focus, self.base.overlap);
        let mut p = self.base.with_overlap(overlap);
        p.shift = self.shifts.zeeman_shift + ac_stark_shift(r, self.trap, self.shifts.ac_stark_peak);
        p
    }
}

/// Monte-Carlo estimate of ⟨τ⟩ = ∫ p(T, r) τ(r) d³r on `detunings`.
///
/// At zero temperature on every axis the distribution is a delta function and
/// a single evaluation at the origin is returned (`n_samples = 1`).
pub fn thermal_average_transmission(
    state: &ThermalState,
    model: &ThermalModel<'_>,
    detunings: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<SampledSpectrum> {
    if n_samples == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    state.validate()?;
    model.base.validate()?;
    let m = detunings.len();

    if state.is_frozen() {
        let p = model.local_params(&Vector3::zeros());
        return Ok(SampledSpectrum {
            detunings: detunings.to_vec(),
            mean_transmission: detunings.iter().map(|d| transmission_at(&p, *d)).collect(),
            mc_standard_error: vec![0.0; m],
            n_samples: 1,
            seed,
        });
    }

    let sigma = sigmas(state, model.trap, model.species.mass);
    let n_chunks = n_samples.div_ceil(CHUNK);
    // Sums of (τ − 1) and (τ − 1)² per detuning; offsetting by 1 keeps the
    // variance estimate free of cancellation.
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut s1 = vec![0.0; m];
            let mut s2 = vec![0.0; m];
            let start = c * CHUNK;
            let end = (start + CHUNK).min(n_samples);
            for i in start..end {
                let r = draw_position(seed, i as u64, &sigma);
                let p = model.local_params(&r);
                for (k, d) in detunings.iter().enumerate() {
                    let dev = transmission_at(&p, *d) - 1.0;
                    s1[k] += dev;
                    s2[k] += dev * dev;
                }
            }
            (s1, s2)
        })
        .collect();

    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for (a, b) in &partials {
        for k in 0..m {
            s1[k] += a[k];
            s2[k] += b[k];
        }
    }
    let n = n_samples as f64;
    let mut mean = Vec::with_capacity(m);
    let mut se = Vec::with_capacity(m);
    for k in 0..m {
        let mu = s1[k] / n;
        mean.push(1.0 + mu);
        let var = if n_samples > 1 {
            ((s2[k] - n * mu * mu) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        se.push((var / n).sqrt());
    }
    Ok(SampledSpectrum {
        detunings: detunings.to_vec(),
        mean_transmission: mean,
        mc_standard_error: se,
        n_samples,
        seed,
    })
}

/// Transmission during a probe pulse that heats the atom it probes.
///
/// For each detuning the pulse is split into `n_bins` bins of
/// `photons_per_bin` incident photons. The averaged τ of a bin is evaluated at
/// the temperature reached at the bin's start, and the expected number of
/// photons removed from the probe mode, N·(1 − τ), is then deposited as recoil
/// heating. Returns τ indexed by [detuning][bin].
pub fn heated_pulse_transmission(
    initial: &ThermalState,
    model: &ThermalModel<'_>,
    detunings: &[f64],
    n_bins: usize,
    photons_per_bin: f64,
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    initial.validate()?;
    if !(photons_per_bin >= 0.0) {
        return Err(Error::domain("photons per bin must be non-negative"));
    }
    detunings
        .par_iter()
        .map(|d| {
            let mut state = *initial;
            let mut row = Vec::with_capacity(n_bins);
            for _ in 0..n_bins {
                let tau = thermal_average_transmission(&state, model, std::slice::from_ref(d), n_samples, seed)?
                    .mean_transmission[0];
                row.push(tau);
                state = recoil_heat_expected(&state, photons_per_bin * (1.0 - tau), model.species);
            }
            Ok(row)
        })
        .collect()
}

/// One row of a heating sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Cumulative scattered photons n_s.
    pub photons: u64,
    /// T_x, T_y, T_z after heating, K
    pub temperatures: [f64; 3],
    /// Fitted lineshape, absent when the fit failed.
    pub fit: Option<SweepFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    /// Fitted linewidth, rad/s
    pub linewidth: f64,
    /// Fitted resonance shift δω, rad/s
    pub shift: f64,
    pub overlap: f64,
    pub phase: f64,
    /// 1 − min τ of the fitted curve
    pub extinction: f64,
    pub reduced_chi_squared: f64,
}

/// Fits the four-parameter transmission model to a Monte-Carlo spectrum.
pub fn fit_sampled_spectrum(spectrum: &SampledSpectrum, natural_linewidth: f64) -> Result<FitResult> {
    let rows: Vec<fitting::DataRow> = spectrum
        .detunings
        .iter()
        .zip(&spectrum.mean_transmission)
        .map(|(x, y)| fitting::DataRow { x: *x, y: *y, sigma: SWEEP_FIT_SIGMA })
        .collect();
    let problem = FitProblem::transmission(rows, natural_linewidth)?;
    Ok(fitting::fit(&problem)?)
}

/// Heats the atom through `photon_schedule` (cumulative counts) and fits the
/// averaged spectrum at each step. All steps reuse `seed`, so consecutive
/// spectra share their underlying random draws. A failed fit is recorded on
/// its row and the sweep continues.
pub fn heating_sweep(
    initial: &ThermalState,
    model: &ThermalModel<'_>,
    photon_schedule: &[u64],
    detunings: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if photon_schedule.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("photon schedule must be nondecreasing"));
    }
    initial.validate()?;
    let mut state = *initial;
    let mut done = 0u64;
    let mut out = Vec::with_capacity(photon_schedule.len());
    for &target in photon_schedule {
        state = recoil_heat(&state, target - done, model.species);
        done = target;
        let spectrum = thermal_average_transmission(&state, model, detunings, n_samples, seed)?;
        let point = match fit_sampled_spectrum(&spectrum, model.species.natural_linewidth) {
            Ok(res) => {
                let p = TransmissionModel::params(&res.params);
                Ok(SweepFit {
                    linewidth: p.linewidth,
                    shift: p.shift,
                    overlap: p.overlap,
                    phase: p.phase,
                    extinction: dip_extinction(&p),
                    reduced_chi_squared: res.reduced_chi_squared,
                })
            }
            Err(e) => Err(e.to_string()),
        };
        let (fit, error) = match point {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e)),
        };
        out.push(SweepPoint {
            photons: state.photons_scattered,
            temperatures: state.temperatures,
            fit,
            error,
        });
    }
    Ok(out)
}
