//! Run configuration document.
//!
//! The file format is TOML in laboratory units: MHz (per 2π), kHz, mK, µK,
//! mm, µm, nm, mT and counts/s. [`RunConfig::resolve`] converts everything to
//! SI units and angular frequencies. Every section is optional and defaults to
//! the rubidium single-atom setup; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::constants::{khz_to_rad, mhz_to_rad, AMU, K_B};
use crate::error::{Error, Result};
use crate::optics::{mode_overlap_ideal, AtomSpecies, FieldShifts, FocalSpot, OpticalSystem, ZeemanTransition};
use crate::photon::{BackscatterModel, DetectorConfig, PulseConfig};
use crate::spectra::LineshapeParams;
use crate::thermal::{effective_overlap, ThermalModel, ThermalState, TrapConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Monte-Carlo position samples per thermal average.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub species: SpeciesSection,
    #[serde(default)]
    pub optics: OpticsSection,
    #[serde(default)]
    pub detector: DetectorSection,
    #[serde(default)]
    pub trap: TrapSection,
    #[serde(default)]
    pub shifts: ShiftsSection,
    #[serde(default)]
    pub lineshape: LineshapeSection,
    #[serde(default)]
    pub thermal: ThermalSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backscatter: Option<BackscatterSection>,
    #[serde(default)]
    pub sweep: SweepSection,
}

pub const DEFAULT_CENTER_SHIFT_MHZ: f64 = 47.32;

fn default_seed() -> u64 {
    1
}

fn default_samples() -> usize {
    100_000
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: default_seed(),
            samples: default_samples(),
            species: Default::default(),
            optics: Default::default(),
            detector: Default::default(),
            trap: Default::default(),
            shifts: Default::default(),
            lineshape: Default::default(),
            thermal: Default::default(),
            pulse: Default::default(),
            backscatter: None,
            sweep: Default::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpeciesSection {
    pub mass_amu: f64,
    pub wavelength_nm: f64,
    pub linewidth_mhz: f64,
}

impl Default for SpeciesSection {
    fn default() -> Self {
        Self {
            mass_amu: 86.909_180_527,
            wavelength_nm: 780.241_209_686,
            linewidth_mhz: 6.07,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsSection {
    pub focal_length_mm: f64,
    pub input_waist_mm: f64,
    pub numerical_aperture: f64,
    pub collection_mode_overlap: f64,
}

impl Default for OpticsSection {
    fn default() -> Self {
        // u = 2.7/5.95 = 0.45378
        Self { focal_length_mm: 5.95, input_waist_mm: 2.7, numerical_aperture: 0.75, collection_mode_overlap: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorSection {
    pub eta_f: f64,
    pub eta_b: f64,
    pub eta_op: f64,
    pub background_f_cps: f64,
    pub background_b_cps: f64,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let d = DetectorConfig::experiment();
        Self {
            eta_f: d.eta_f,
            eta_b: d.eta_b,
            eta_op: d.eta_op,
            background_f_cps: d.background_f,
            background_b_cps: d.background_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub depth_mk: f64,
    pub frequencies_khz: [f64; 3],
    pub waist_um: f64,
    pub wavelength_nm: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        Self { depth_mk: 2.22, frequencies_khz: [107.0, 124.0, 13.8], waist_um: 1.4, wavelength_nm: 852.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftsSection {
    pub bias_field_mt: f64,
    /// Resonance shift at the trap center δω(0). The AC Stark peak is
    /// whatever remains after the Zeeman shift. Defaults to 47.32 MHz when
    /// neither this nor `ac_stark_peak_mhz` is set.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_shift_mhz: Option<f64>,
    /// Alternative to `center_shift_mhz`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ac_stark_peak_mhz: Option<f64>,
    pub g_lower: f64,
    pub m_lower: i32,
    pub g_upper: f64,
    pub m_upper: i32,
}

impl Default for ShiftsSection {
    fn default() -> Self {
        let t = ZeemanTransition::RB87_STRETCHED;
        Self {
            bias_field_mt: 0.74,
            center_shift_mhz: None,
            ac_stark_peak_mhz: None,
            g_lower: t.g_lower,
            m_lower: t.m_lower,
            g_upper: t.g_upper,
            m_upper: t.m_upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LineshapeSection {
    /// Defaults to the natural linewidth.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linewidth_mhz: Option<f64>,
    /// Overlap at the focus. Defaults to the ideal Λ(u) of the optics.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    /// Fractional reduction α applied to the overlap: Λ_eff = (1 − α)Λ.
    pub alpha: f64,
    pub phase_rad: f64,
}

impl Default for LineshapeSection {
    fn default() -> Self {
        Self { linewidth_mhz: None, overlap: None, alpha: 0.0, phase_rad: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalSection {
    pub temperature_uk: [f64; 3],
    /// Let the probe heat the atom during each pulse.
    pub heating: bool,
}

impl Default for ThermalSection {
    fn default() -> Self {
        Self { temperature_uk: [21.0; 3], heating: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub duration_ms: f64,
    pub mean_incident_photons: f64,
    pub repetitions: u32,
    pub bin_width_ms: f64,
    pub detuning_start_mhz: f64,
    pub detuning_stop_mhz: f64,
    pub detuning_points: usize,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self {
            duration_ms: 20.0,
            mean_incident_photons: 550.0,
            repetitions: 200,
            bin_width_ms: 20.0,
            detuning_start_mhz: 28.0,
            detuning_stop_mhz: 68.0,
            detuning_points: 41,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackscatterSection {
    /// Probability per incident photon of scattering into the backward
    /// collection mode, before the detector efficiency.
    pub resonant_probability: f64,
    /// Defaults to the lineshape linewidth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_mhz: Option<f64>,
    /// Defaults to the center shift.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_mhz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Cumulative scattered-photon counts at which to fit.
    pub photons: Vec<u64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { photons: (0..=10).map(|i| i * 50).collect() }
    }
}

/// A configuration converted to SI units and model types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub samples: usize,
    pub species: AtomSpecies,
    pub optics: OpticalSystem,
    pub probe_focus: FocalSpot,
    pub detector: DetectorConfig,
    pub trap: TrapConfig,
    pub shifts: FieldShifts,
    /// Lineshape at the trap center; `shift` equals δω(0).
    pub base: LineshapeParams,
    pub thermal: ThermalState,
    pub heating: bool,
    pub pulse: PulseConfig,
    pub backscatter: Option<BackscatterModel>,
    pub schedule: Vec<u64>,
}

impl Resolved {
    pub fn thermal_model(&self) -> ThermalModel<'_> {
        ThermalModel {
            species: &self.species,
            trap: &self.trap,
            probe_focus: &self.probe_focus,
            shifts: &self.shifts,
            base: &self.base,
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

fn require(cond: bool, msg: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.into()))
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    /// Converts to SI units and checks every physical constraint.
    pub fn resolve(&self) -> Result<Resolved> {
        let sp = &self.species;
        let species = AtomSpecies::new(sp.mass_amu * AMU, sp.wavelength_nm * 1e-9, mhz_to_rad(sp.linewidth_mhz))
            .map_err(config_err)?;

        let d = &self.detector;
        let detector = DetectorConfig {
            eta_f: d.eta_f,
            eta_b: d.eta_b,
            background_f: d.background_f_cps,
            background_b: d.background_b_cps,
            eta_op: d.eta_op,
        };
        detector.validate().map_err(config_err)?;

        let o = &self.optics;
        require(
            o.numerical_aperture > 0.0 && o.numerical_aperture < 1.0,
            format!("numerical_aperture = {} must lie in (0, 1)", o.numerical_aperture),
        )?;
        let optics = OpticalSystem {
            focal_length: o.focal_length_mm * 1e-3,
            input_waist: o.input_waist_mm * 1e-3,
            numerical_aperture: o.numerical_aperture,
            eta_f: d.eta_f,
            eta_b: d.eta_b,
            eta_op: d.eta_op,
            collection_mode_overlap: o.collection_mode_overlap,
        };
        optics.validate().map_err(config_err)?;
        let probe_focus = optics.focal_spot(species.transition_wavelength);

        let t = &self.trap;
        let trap = TrapConfig {
            depth: K_B * t.depth_mk * 1e-3,
            frequencies: t.frequencies_khz.map(khz_to_rad),
            waist: t.waist_um * 1e-6,
            wavelength: t.wavelength_nm * 1e-9,
        };
        trap.validate().map_err(config_err)?;

        let s = &self.shifts;
        let transition = ZeemanTransition { g_lower: s.g_lower, m_lower: s.m_lower, g_upper: s.g_upper, m_upper: s.m_upper };
        let bias = s.bias_field_mt * 1e-3;
        let shifts = match (s.center_shift_mhz, s.ac_stark_peak_mhz) {
            (Some(c), None) => FieldShifts::from_center_shift(bias, &transition, mhz_to_rad(c)),
            (None, Some(a)) => FieldShifts::new(bias, &transition, mhz_to_rad(a)),
            (None, None) => FieldShifts::from_center_shift(bias, &transition, mhz_to_rad(DEFAULT_CENTER_SHIFT_MHZ)),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "set only one of shifts.center_shift_mhz and shifts.ac_stark_peak_mhz".into(),
                ))
            }
        };
        require(shifts.center_shift().is_finite(), "resonance shift must be finite")?;

        let l = &self.lineshape;
        let linewidth = mhz_to_rad(l.linewidth_mhz.unwrap_or(sp.linewidth_mhz));
        let raw_overlap = match l.overlap {
            Some(v) => v,
            None => mode_overlap_ideal(optics.focusing_strength()).map_err(config_err)?,
        };
        let overlap = effective_overlap(raw_overlap, l.alpha).map_err(config_err)?;
        let base = LineshapeParams::matched(linewidth, shifts.center_shift(), overlap, l.phase_rad);
        base.validate().map_err(config_err)?;

        let thermal = ThermalState { temperatures: self.thermal.temperature_uk.map(|t| t * 1e-6), photons_scattered: 0 };
        thermal.validate().map_err(config_err)?;

        let p = &self.pulse;
        require(p.detuning_points >= 1, "pulse.detuning_points must be at least 1")?;
        require(
            p.detuning_start_mhz.is_finite() && p.detuning_stop_mhz.is_finite(),
            "detuning range must be finite",
        )?;
        let detunings = if p.detuning_points == 1 {
            vec![mhz_to_rad(p.detuning_start_mhz)]
        } else {
            let n = (p.detuning_points - 1) as f64;
            (0..p.detuning_points)
                .map(|i| {
                    let i = i as f64;
                    mhz_to_rad((p.detuning_start_mhz * (n - i) + p.detuning_stop_mhz * i) / n)
                })
                .collect()
        };
        let pulse = PulseConfig {
            duration: p.duration_ms * 1e-3,
            mean_incident_photons: p.mean_incident_photons,
            detunings,
            bin_width: p.bin_width_ms * 1e-3,
            repetitions: p.repetitions,
        };
        pulse.validate().map_err(config_err)?;

        let backscatter = match &self.backscatter {
            None => None,
            Some(b) => {
                require(
                    (0.0..=1.0).contains(&b.resonant_probability),
                    "backscatter.resonant_probability must lie in [0, 1]",
                )?;
                let lw = b.linewidth_mhz.map_or(linewidth, mhz_to_rad);
                require(lw > 0.0, "backscatter linewidth must be positive")?;
                Some(BackscatterModel {
                    resonant_probability: b.resonant_probability,
                    linewidth: lw,
                    shift: b.shift_mhz.map_or(shifts.center_shift(), mhz_to_rad),
                })
            }
        };

        require(self.samples >= 1, "samples must be at least 1")?;
        require(
            self.sweep.photons.windows(2).all(|w| w[0] <= w[1]),
            "sweep.photons must be nondecreasing",
        )?;

        Ok(Resolved {
            seed: self.seed,
            samples: self.samples,
            species,
            optics,
            probe_focus,
            detector,
            trap,
            shifts,
            base,
            thermal,
            heating: self.thermal.heating,
            pulse,
            backscatter,
            schedule: self.sweep.photons.clone(),
        })
    }
}
