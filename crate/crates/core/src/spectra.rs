//! Stationary-atom transmission, backscattering and saturation lineshapes.

use serde::{Deserialize, Serialize};

use crate::constants::HBAR;
use crate::error::{Error, Result};
use crate::optics::AtomSpecies;

/// Parameters of the transmission lineshape. Frequencies in rad/s.
///
/// The general form carries an independent amplitude `amplitude` (A) and
/// mode-mismatch phase `phase` (φ); the matched form ties A = ΓΛ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeParams {
    /// Γ
    pub linewidth: f64,
    /// δω, resonance shift from ω0
    pub shift: f64,
    /// Λ
    pub overlap: f64,
    /// φ
    pub phase: f64,
    /// A
    pub amplitude: f64,
}

impl LineshapeParams {
    /// Parameterization with A = ΓΛ, as used in the four-parameter fits.
    pub fn matched(linewidth: f64, shift: f64, overlap: f64, phase: f64) -> Self {
        Self {
            linewidth,
            shift,
            overlap,
            phase,
            amplitude: linewidth * overlap,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.linewidth > 0.0) {
            return Err(Error::domain(format!("linewidth must be positive, got {}", self.linewidth)));
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::domain(format!("overlap {} is outside [0, 1]", self.overlap)));
        }
        if !(self.phase > -std::f64::consts::PI && self.phase <= std::f64::consts::PI) {
            return Err(Error::domain(format!("phase {} is outside (-π, π]", self.phase)));
        }
        Ok(())
    }

    /// Same parameters with Λ (and the tied amplitude) scaled to `overlap`.
    pub fn with_overlap(&self, overlap: f64) -> Self {
        let ratio = if self.overlap != 0.0 { overlap / self.overlap } else { 0.0 };
        Self {
            overlap,
            amplitude: if self.overlap != 0.0 {
                self.amplitude * ratio
            } else {
                self.linewidth * overlap
            },
            ..*self
        }
    }
}

/// Relative transmission τ as a function of the probe detuning ω_p − ω0.
///
/// No validation; callers on hot paths validate `params` once.
#[inline]
pub fn transmission_at(params: &LineshapeParams, detuning: f64) -> f64 {
    let d = detuning - params.shift;
    let half = 0.5 * params.linewidth;
    let lorentz = 1.0 / (d * d + half * half);
    let a = params.amplitude;
    let (s, c) = params.phase.sin_cos();
    1.0 + a * a * lorentz + 2.0 * a * lorentz * (d * s - half * c)
}

/// Relative transmission τ(ω_p) of the probe past a stationary atom.
pub fn transmission(params: &LineshapeParams, probe_frequency: f64, transition_frequency: f64) -> Result<f64> {
    if !(params.linewidth > 0.0) {
        return Err(Error::domain(format!("linewidth must be positive, got {}", params.linewidth)));
    }
    Ok(transmission_at(params, probe_frequency - transition_frequency))
}

/// Location and depth of the transmission minimum, `(detuning, τ_min)`.
///
/// With φ ≠ 0 the dip is displaced from ω0 + δω by the dispersive term.
pub fn transmission_minimum(params: &LineshapeParams) -> (f64, f64) {
    let a = params.amplitude;
    let g = params.linewidth;
    let (s, c) = params.phase.sin_cos();
    // Stationary points of (a² − aΓcosφ + 2a sinφ·D)/(D² + Γ²/4):
    // a sinφ D² + (a² − aΓcosφ) D − a sinφ Γ²/4 = 0
    let lin = a * a - a * g * c;
    let quad = a * s;
    let candidates: Vec<f64> = if quad.abs() < 1e-300 {
        vec![0.0]
    } else {
        let disc = (lin * lin + quad * quad * g * g).sqrt();
        vec![(-lin + disc) / (2.0 * quad), (-lin - disc) / (2.0 * quad)]
    };
    candidates
        .into_iter()
        .map(|d| (d + params.shift, transmission_at(params, d + params.shift)))
        .fold((params.shift, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Extinction of the dip, 1 − min τ.
pub fn dip_extinction(params: &LineshapeParams) -> f64 {
    1.0 - transmission_minimum(params).1
}

/// Backscattering probability per incident photon, a Lorentzian of FWHM Γ.
pub fn reflection(
    resonant_probability: f64,
    linewidth: f64,
    shift: f64,
    probe_frequency: f64,
    transition_frequency: f64,
) -> Result<f64> {
    if !(linewidth > 0.0) {
        return Err(Error::domain(format!("linewidth must be positive, got {linewidth}")));
    }
    if !(0.0..=1.0).contains(&resonant_probability) {
        return Err(Error::domain(format!(
            "resonant backscatter probability {resonant_probability} is outside [0, 1]"
        )));
    }
    Ok(reflection_at(resonant_probability, linewidth, shift, probe_frequency - transition_frequency))
}

#[inline]
pub fn reflection_at(resonant_probability: f64, linewidth: f64, shift: f64, detuning: f64) -> f64 {
    let d = detuning - shift;
    resonant_probability / (4.0 * d * d / (linewidth * linewidth) + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationParams {
    /// W
    pub p_sat: f64,
    /// Total detection efficiency η.
    pub eta: f64,
    /// Incident power at the atom, W.
    pub p_inc: f64,
}

/// Saturation power for perfect mode matching, ħω0Γ0/8.
pub fn ideal_saturation_power(species: &AtomSpecies) -> f64 {
    HBAR * species.transition_frequency() * species.natural_linewidth / 8.0
}

/// Overlap inferred from a measured saturation power, Λ = P_sat,Λ=1 / P_sat.
///
/// A result above unity is reported as [`Error::ModelInconsistency`] rather
/// than clamped.
pub fn overlap_from_saturation(p_sat: f64, species: &AtomSpecies) -> Result<f64> {
    if !(p_sat > 0.0) {
        return Err(Error::domain(format!("saturation power must be positive, got {p_sat}")));
    }
    let overlap = ideal_saturation_power(species) / p_sat;
    if overlap > 1.0 {
        return Err(Error::ModelInconsistency {
            message: "saturation power below the perfect-overlap limit".into(),
            value: overlap,
        });
    }
    Ok(overlap)
}

/// Detected backscatter rate R_b = (ηΓ0/2)·P_inc/(P_inc + P_sat), counts/s.
pub fn backscatter_rate(sat: &SaturationParams, natural_linewidth: f64) -> f64 {
    0.5 * sat.eta * natural_linewidth * sat.p_inc / (sat.p_inc + sat.p_sat)
}
