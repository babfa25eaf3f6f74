//! Synthetic photodetection records for the probe/reference sequence.
//!
//! Each probe pulse is followed by a reference pulse of identical photon
//! number distribution with the atom detuned away. Counts are summed over
//! `repetitions` pulses per detuning and binned in time. All derived
//! quantities (scattered photons, transmission) are per pulse.

use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::DataRow;
use crate::rng::{self, Domain};
use crate::spectra::{reflection_at, transmission_at, LineshapeParams};
use crate::thermal::SampledSpectrum;

/// Minimum raw reference counts for a rebinned group to count as usable.
pub const MIN_GROUP_COUNTS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Forward detector efficiency η_f.
    pub eta_f: f64,
    /// Backward detector efficiency η_b.
    pub eta_b: f64,
    /// Forward background, counts/s.
    pub background_f: f64,
    /// Backward background, counts/s.
    pub background_b: f64,
    /// Transmission from the atom to the forward detector η_op.
    pub eta_op: f64,
}

impl DetectorConfig {
    pub fn experiment() -> Self {
        Self { eta_f: 0.56, eta_b: 0.59, background_f: 155.0, background_b: 300.0, eta_op: 0.59 }
    }

    /// η_f·η_op
    pub fn forward_efficiency(&self) -> f64 {
        self.eta_f * self.eta_op
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_f", self.eta_f), ("eta_b", self.eta_b), ("eta_op", self.eta_op)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        if !(self.background_f >= 0.0) || !(self.background_b >= 0.0) {
            return Err(Error::domain("background rates must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseConfig {
    /// t_p, s
    pub duration: f64,
    /// Mean incident photons per pulse at the atom.
    pub mean_incident_photons: f64,
    /// Probe detunings ω_p − ω0, rad/s
    pub detunings: Vec<f64>,
    /// Time-bin width, s. Must divide the pulse into a whole number of bins.
    pub bin_width: f64,
    /// Pulses accumulated per detuning.
    pub repetitions: u32,
}

impl PulseConfig {
    pub fn n_bins(&self) -> usize {
        ((self.duration / self.bin_width).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !(self.bin_width > 0.0) || self.bin_width > self.duration * (1.0 + 1e-12) {
            return Err(Error::domain("pulse duration and bin width must be positive with bin ≤ duration"));
        }
        let ratio = self.duration / self.bin_width;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio {
            return Err(Error::domain(format!(
                "bin width {} s does not divide the pulse duration {} s",
                self.bin_width, self.duration
            )));
        }
        if !(self.mean_incident_photons >= 0.0) {
            return Err(Error::domain("mean incident photon number must be non-negative"));
        }
        if self.repetitions == 0 {
            return Err(Error::domain("at least one repetition is required"));
        }
        if self.detunings.is_empty() {
            return Err(Error::domain("detuning grid is empty"));
        }
        Ok(())
    }
}

/// Backward-mode scattering: per incident photon, the probability of a
/// photon entering the backward collection mode, before detector efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackscatterModel {
    pub resonant_probability: f64,
    /// rad/s
    pub linewidth: f64,
    /// rad/s
    pub shift: f64,
}

/// Supplies the true transmission while the run is generated.
pub trait TransmissionSource: Sync {
    /// τ at grid point `index` (detuning `detuning`) during time bin `bin` of `n_bins`.
    fn transmission(&self, index: usize, detuning: f64, bin: usize, n_bins: usize) -> f64;

    /// Detuning grid the source is tied to, if any.
    fn grid(&self) -> Option<&[f64]> {
        None
    }
}

impl TransmissionSource for LineshapeParams {
    fn transmission(&self, _index: usize, detuning: f64, _bin: usize, _n_bins: usize) -> f64 {
        transmission_at(self, detuning)
    }
}

impl TransmissionSource for SampledSpectrum {
    fn transmission(&self, index: usize, _detuning: f64, _bin: usize, _n_bins: usize) -> f64 {
        self.mean_transmission[index]
    }

    fn grid(&self) -> Option<&[f64]> {
        Some(&self.detunings)
    }
}

/// Time-dependent source from a closure `(index, detuning, bin, n_bins) -> τ`.
pub struct TimeResolved<F>(pub F);

impl<F> TransmissionSource for TimeResolved<F>
where
    F: Fn(usize, f64, usize, usize) -> f64 + Sync,
{
    fn transmission(&self, index: usize, detuning: f64, bin: usize, n_bins: usize) -> f64 {
        (self.0)(index, detuning, bin, n_bins)
    }
}

/// Counts for one probe detuning, summed over all repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// rad/s
    pub detuning: f64,
    pub probe_f: Vec<u64>,
    pub reference_f: Vec<u64>,
    pub probe_b: Vec<u64>,
    /// Expected photons removed from the forward mode per pulse, per bin.
    pub true_scattered: Vec<f64>,
}

/// A full simulated measurement: one record per detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRun {
    pub seed: u64,
    /// s
    pub bin_width: f64,
    pub repetitions: u32,
    pub mean_incident_photons: f64,
    pub records: Vec<CountRecord>,
}

impl CountRun {
    pub fn n_bins(&self) -> usize {
        self.records.first().map_or(0, |r| r.probe_f.len())
    }
}

fn poisson(mean: f64, seed: u64, index: u64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let mut rng = rng::stream(seed, Domain::Counts, index);
    Poisson::new(mean).expect("positive finite mean").sample(&mut rng) as u64
}

/// Simulates probe and reference counts on `pulse.detunings`.
///
/// Per time bin with N̄ incident photons per pulse and R repetitions:
/// reference ~ Poisson(R·N̄·η_op·η_f + R·bg_f·Δt),
/// probe ~ Poisson(τ·R·N̄·η_op·η_f + R·bg_f·Δt),
/// backward ~ Poisson(R·N̄·P_b·η_b + R·bg_b·Δt).
/// The draw for (detuning, bin, channel) depends only on `seed` and those indices.
pub fn generate_run(
    source: &dyn TransmissionSource,
    backscatter: Option<&BackscatterModel>,
    pulse: &PulseConfig,
    det: &DetectorConfig,
    seed: u64,
) -> Result<CountRun> {
    pulse.validate()?;
    det.validate()?;
    if let Some(grid) = source.grid() {
        if grid != pulse.detunings.as_slice() {
            return Err(Error::domain(format!(
                "transmission source grid ({} points) does not match the pulse grid ({} points)",
                grid.len(),
                pulse.detunings.len()
            )));
        }
    }
    let n_bins = pulse.n_bins();
    let bin_width = pulse.duration / n_bins as f64;
    let reps = pulse.repetitions as f64;
    let incident = pulse.mean_incident_photons / n_bins as f64;
    let fwd = det.forward_efficiency();
    let bg_f = reps * det.background_f * bin_width;
    let bg_b = reps * det.background_b * bin_width;

    let records = pulse
        .detunings
        .par_iter()
        .enumerate()
        .map(|(k, &detuning)| {
            let mut rec = CountRecord {
                detuning,
                probe_f: Vec::with_capacity(n_bins),
                reference_f: Vec::with_capacity(n_bins),
                probe_b: Vec::with_capacity(n_bins),
                true_scattered: Vec::with_capacity(n_bins),
            };
            let p_back = backscatter.map_or(0.0, |b| {
                reflection_at(b.resonant_probability, b.linewidth, b.shift, detuning)
            });
            for bin in 0..n_bins {
                let tau = source.transmission(k, detuning, bin, n_bins);
                let key = ((k as u64) << 32) | ((bin as u64) << 2);
                rec.reference_f.push(poisson(reps * incident * fwd + bg_f, seed, key));
                rec.probe_f.push(poisson(tau * reps * incident * fwd + bg_f, seed, key | 1));
                rec.probe_b.push(poisson(reps * incident * p_back * det.eta_b + bg_b, seed, key | 2));
                rec.true_scattered.push(incident * (1.0 - tau));
            }
            rec
        })
        .collect();

    Ok(CountRun {
        seed,
        bin_width,
        repetitions: pulse.repetitions,
        mean_incident_photons: pulse.mean_incident_photons,
        records,
    })
}

/// Expected background counts for a rate (counts/s) over `duration` seconds.
pub fn expected_background(rate: f64, duration: f64) -> f64 {
    rate * duration
}

/// Background-subtracted counts of one record (summed over repetitions).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectedRecord {
    pub detuning: f64,
    pub probe_f: Vec<f64>,
    pub reference_f: Vec<f64>,
    pub probe_b: Vec<f64>,
}

/// Subtracts the expected background from each bin. Negative results are
/// kept so that averages stay unbiased.
pub fn background_correct(raw: &CountRecord, det: &DetectorConfig, bin_width: f64, repetitions: u32) -> CorrectedRecord {
    let bg_f = repetitions as f64 * expected_background(det.background_f, bin_width);
    let bg_b = repetitions as f64 * expected_background(det.background_b, bin_width);
    CorrectedRecord {
        detuning: raw.detuning,
        probe_f: raw.probe_f.iter().map(|c| *c as f64 - bg_f).collect(),
        reference_f: raw.reference_f.iter().map(|c| *c as f64 - bg_f).collect(),
        probe_b: raw.probe_b.iter().map(|c| *c as f64 - bg_b).collect(),
    }
}

/// Photons scattered out of the forward mode, n_s = (n_ref − n_p)/(η_f·η_op).
/// Noise can make the result negative; it is returned as is.
pub fn scattered_photons(n_ref: f64, n_p: f64, det: &DetectorConfig) -> f64 {
    (n_ref - n_p) / det.forward_efficiency()
}

/// Cumulative n_s per pulse at the end of each time bin.
pub fn cumulative_scattered(corrected: &CorrectedRecord, det: &DetectorConfig, repetitions: u32) -> Vec<f64> {
    let mut acc = 0.0;
    corrected
        .reference_f
        .iter()
        .zip(&corrected.probe_f)
        .map(|(r, p)| {
            acc += scattered_photons(*r, *p, det) / repetitions as f64;
            acc
        })
        .collect()
}

/// Transmission ratio of background-corrected sums with its Poisson error.
/// `raw_probe` and `raw_ref` are the uncorrected totals that set the variance.
fn ratio_with_error(probe: f64, reference: f64, raw_probe: f64, raw_ref: f64) -> (f64, f64, bool) {
    if !(reference > 0.0) || raw_ref < MIN_GROUP_COUNTS {
        return (f64::NAN, f64::NAN, true);
    }
    let tau = probe / reference;
    let var = raw_probe / (reference * reference) + tau * tau * raw_ref / (reference * reference);
    (tau, var.sqrt(), raw_probe <= 0.0)
}

/// One detuning's entry in a rebinned spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRow {
    /// rad/s
    pub detuning: f64,
    pub transmission: f64,
    pub std_error: f64,
    pub time_bins: usize,
    /// Too few counts for a meaningful ratio.
    pub insufficient: bool,
}

/// Transmission spectrum of all time bins whose cumulative scattered-photon
/// count falls in `[photons_low, photons_high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedSpectrum {
    pub group: usize,
    pub photons_low: f64,
    pub photons_high: f64,
    pub rows: Vec<BinnedRow>,
}

impl BinnedSpectrum {
    /// Usable rows as fit input; flagged rows are skipped.
    pub fn fit_rows(&self) -> Vec<DataRow> {
        self.rows
            .iter()
            .filter(|r| !r.insufficient && r.std_error > 0.0)
            .map(|r| DataRow { x: r.detuning, y: r.transmission, sigma: r.std_error })
            .collect()
    }
}

/// Regroups every detuning's time bins by cumulative scattered photons.
///
/// A time bin joins group ⌊n_s/width⌋, with n_s the per-pulse cumulative
/// count at the bin's midpoint (negative values fall into group 0).
pub fn rebin_by_scattered(run: &CountRun, det: &DetectorConfig, photon_bin_width: f64) -> Result<Vec<BinnedSpectrum>> {
    if !(photon_bin_width > 0.0) {
        return Err(Error::domain("photon bin width must be positive"));
    }
    // group -> detuning index -> (probe, ref, raw probe, raw ref, bins)
    let mut groups: std::collections::BTreeMap<usize, Vec<Option<[f64; 5]>>> = Default::default();
    for (k, rec) in run.records.iter().enumerate() {
        let corrected = background_correct(rec, det, run.bin_width, run.repetitions);
        let cum = cumulative_scattered(&corrected, det, run.repetitions);
        for bin in 0..cum.len() {
            let start = if bin == 0 { 0.0 } else { cum[bin - 1] };
            let mid = 0.5 * (start + cum[bin]);
            let g = (mid.max(0.0) / photon_bin_width).floor() as usize;
            let entry = groups.entry(g).or_insert_with(|| vec![None; run.records.len()]);
            let acc = entry[k].get_or_insert([0.0; 5]);
            acc[0] += corrected.probe_f[bin];
            acc[1] += corrected.reference_f[bin];
            acc[2] += rec.probe_f[bin] as f64;
            acc[3] += rec.reference_f[bin] as f64;
            acc[4] += 1.0;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(g, per_detuning)| BinnedSpectrum {
            group: g,
            photons_low: g as f64 * photon_bin_width,
            photons_high: (g + 1) as f64 * photon_bin_width,
            rows: per_detuning
                .into_iter()
                .enumerate()
                .filter_map(|(k, acc)| {
                    acc.map(|a| {
                        let (tau, se, flag) = ratio_with_error(a[0], a[1], a[2], a[3]);
                        BinnedRow {
                            detuning: run.records[k].detuning,
                            transmission: tau,
                            std_error: se,
                            time_bins: a[4] as usize,
                            insufficient: flag,
                        }
                    })
                })
                .collect(),
        })
        .collect())
}

/// Pulse-integrated transmission per detuning as fit input. Detunings with
/// no usable reference counts are dropped and counted.
pub fn transmission_rows(run: &CountRun, det: &DetectorConfig) -> (Vec<DataRow>, usize) {
    let mut rows = Vec::new();
    let mut excluded = 0;
    for rec in &run.records {
        let c = background_correct(rec, det, run.bin_width, run.repetitions);
        let (tau, se, flag) = ratio_with_error(
            c.probe_f.iter().sum(),
            c.reference_f.iter().sum(),
            rec.probe_f.iter().sum::<u64>() as f64,
            rec.reference_f.iter().sum::<u64>() as f64,
        );
        if flag || !(se > 0.0) {
            excluded += 1;
            continue;
        }
        rows.push(DataRow { x: rec.detuning, y: tau, sigma: se });
    }
    (rows, excluded)
}

/// Detected backscatter probability per incident photon, with the incident
/// number inferred from the reference counts.
pub fn reflection_rows(run: &CountRun, det: &DetectorConfig) -> (Vec<DataRow>, usize) {
    let mut rows = Vec::new();
    let mut excluded = 0;
    for rec in &run.records {
        let c = background_correct(rec, det, run.bin_width, run.repetitions);
        let reference: f64 = c.reference_f.iter().sum();
        let raw_ref = rec.reference_f.iter().sum::<u64>() as f64;
        let back: f64 = c.probe_b.iter().sum();
        let raw_back = rec.probe_b.iter().sum::<u64>() as f64;
        if !(reference > 0.0) || raw_back <= 0.0 {
            excluded += 1;
            continue;
        }
        let incident = reference / det.forward_efficiency();
        let p = back / incident;
        let se = (raw_back / (incident * incident) + p * p * raw_ref / (reference * reference)).sqrt();
        rows.push(DataRow { x: rec.detuning, y: p, sigma: se });
    }
    (rows, excluded)
}
