//! Atom and lens data, ideal and position-dependent mode overlap, and the
//! Zeeman / AC Stark level-shift calculators.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::constants::{self, C, HBAR, MU_B};
use crate::error::{Error, Result};
use crate::special::scaled_upper_incomplete_gamma;
use crate::thermal::TrapConfig;

/// Two-level atomic species driven on a closed cycling transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    /// kg
    pub mass: f64,
    /// m
    pub transition_wavelength: f64,
    /// Γ0, rad/s
    pub natural_linewidth: f64,
    /// E_r = ħ²k²/2m, J
    pub recoil_energy: f64,
}

impl AtomSpecies {
    pub fn new(mass: f64, transition_wavelength: f64, natural_linewidth: f64) -> Result<Self> {
        if !(mass > 0.0) || !(transition_wavelength > 0.0) || !(natural_linewidth > 0.0) {
            return Err(Error::domain(format!(
                "species requires positive mass, wavelength and linewidth \
                 (got {mass}, {transition_wavelength}, {natural_linewidth})"
            )));
        }
        let k = 2.0 * PI / transition_wavelength;
        Ok(Self {
            mass,
            transition_wavelength,
            natural_linewidth,
            recoil_energy: HBAR * HBAR * k * k / (2.0 * mass),
        })
    }

    /// ⁸⁷Rb on the 5S1/2 F=2 → 5P3/2 F'=3 line.
    pub fn rubidium87() -> Self {
        Self::new(
            constants::RB87_MASS,
            constants::RB87_D2_WAVELENGTH,
            2.0 * PI * constants::RB87_D2_LINEWIDTH_HZ,
        )
        .expect("tabulated species data are valid")
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.transition_wavelength
    }

    /// Transition angular frequency ω0, rad/s.
    pub fn transition_frequency(&self) -> f64 {
        2.0 * PI * C / self.transition_wavelength
    }

    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new(self.mass, self.transition_wavelength, self.natural_linewidth)?;
        let rel = ((fresh.recoil_energy - self.recoil_energy) / fresh.recoil_energy).abs();
        if rel > 1e-12 {
            return Err(Error::domain(format!(
                "stored recoil energy {} J disagrees with ħ²k²/2m = {} J",
                self.recoil_energy, fresh.recoil_energy
            )));
        }
        Ok(())
    }
}

/// Focusing and detection geometry of the lens pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalSystem {
    /// f, m
    pub focal_length: f64,
    /// Gaussian waist of the collimated beam before the lens, m.
    pub input_waist: f64,
    pub numerical_aperture: f64,
    /// Forward detector efficiency.
    pub eta_f: f64,
    /// Backward detector efficiency.
    pub eta_b: f64,
    /// Transmission of the optical path from the atom to the forward detector.
    pub eta_op: f64,
    pub collection_mode_overlap: f64,
}

impl OpticalSystem {
    /// u = w_L / f
    pub fn focusing_strength(&self) -> f64 {
        self.input_waist / self.focal_length
    }

    pub fn focal_spot(&self, wavelength: f64) -> FocalSpot {
        let waist = wavelength * self.focal_length / (PI * self.input_waist);
        FocalSpot {
            waist,
            rayleigh_range: PI * waist * waist / wavelength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length > 0.0) || !(self.input_waist > 0.0) {
            return Err(Error::domain("focal length and input waist must be positive"));
        }
        for (name, v) in [
            ("eta_f", self.eta_f),
            ("eta_b", self.eta_b),
            ("eta_op", self.eta_op),
            ("collection_mode_overlap", self.collection_mode_overlap),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Paraxial focal waist and Rayleigh range of the focused probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalSpot {
    pub waist: f64,
    pub rayleigh_range: f64,
}

/// Center shift of the probe resonance, δω(0) = ω_z + ω_ac(0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldShifts {
    /// T
    pub bias_field: f64,
    /// rad/s
    pub zeeman_shift: f64,
    /// AC Stark shift of the transition at the trap center, rad/s.
    pub ac_stark_peak: f64,
}

impl FieldShifts {
    pub fn new(bias_field: f64, transition: &ZeemanTransition, ac_stark_peak: f64) -> Self {
        Self {
            bias_field,
            zeeman_shift: zeeman_shift(
                bias_field,
                transition.g_lower,
                transition.m_lower,
                transition.g_upper,
                transition.m_upper,
            ),
            ac_stark_peak,
        }
    }

    /// Builds shifts whose center value equals `center_shift`, attributing the
    /// remainder after the Zeeman term to the AC Stark shift.
    pub fn from_center_shift(bias_field: f64, transition: &ZeemanTransition, center_shift: f64) -> Self {
        let mut s = Self::new(bias_field, transition, 0.0);
        s.ac_stark_peak = center_shift - s.zeeman_shift;
        s
    }

    pub fn center_shift(&self) -> f64 {
        self.zeeman_shift + self.ac_stark_peak
    }
}

/// Landé factors and magnetic quantum numbers of a lower/upper level pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeemanTransition {
    pub g_lower: f64,
    pub m_lower: i32,
    pub g_upper: f64,
    pub m_upper: i32,
}

impl ZeemanTransition {
    /// 5S1/2 F=2, m_F=−2 → 5P3/2 F'=3, m_F'=−3 of ⁸⁷Rb.
    pub const RB87_STRETCHED: Self = Self {
        g_lower: 0.5,
        m_lower: -2,
        g_upper: 2.0 / 3.0,
        m_upper: -3,
    };
}

/// Ideal overlap Λ of a Gaussian beam focused by an aberration-free lens with
/// the dipole mode of a stationary atom, as a function of u = w_L/f.
pub fn mode_overlap_ideal(u: f64) -> Result<f64> {
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::domain(format!("focusing strength must be positive, got {u}")));
    }
    let x = 1.0 / (u * u);
    // e^(2/u²)[Γ(−1/4, x) + uΓ(1/4, x)]² = [e^x Γ(−1/4, x) + u e^x Γ(1/4, x)]²
    let bracket = scaled_upper_incomplete_gamma(-0.25, x)? + u * scaled_upper_incomplete_gamma(0.25, x)?;
    Ok(3.0 / (16.0 * u * u * u) * bracket * bracket)
}

/// Maximizes `mode_overlap_ideal` over `[lo, hi]` by golden-section search.
/// Returns `(u*, Λ(u*))`.
pub fn optimal_focusing(lo: f64, hi: f64) -> Result<(f64, f64)> {
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::domain(format!("invalid search interval [{lo}, {hi}]")));
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = mode_overlap_ideal(c)?;
    let mut fd = mode_overlap_ideal(d)?;
    while (b - a) > 1e-10 * (a.abs() + b.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = mode_overlap_ideal(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = mode_overlap_ideal(d)?;
        }
    }
    let u = 0.5 * (a + b);
    Ok((u, mode_overlap_ideal(u)?))
}

/// On-resonance extinction of a mode-matched probe, ε = 4Λ(1 − Λ).
pub fn resonant_extinction(overlap: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::domain(format!("overlap {overlap} is outside [0, 1]")));
    }
    Ok(4.0 * overlap * (1.0 - overlap))
}

/// Position-dependent overlap for an atom displaced by `r` from the focus:
/// Gaussian in the transverse plane, Lorentzian along the axis.
pub fn spatial_overlap(r: &Vector3<f64>, spot: &FocalSpot, overlap_at_focus: f64) -> f64 {
    let rho2 = r.x * r.x + r.y * r.y;
    let zr = r.z / spot.rayleigh_range;
    overlap_at_focus * (-2.0 * rho2 / (spot.waist * spot.waist)).exp() / (1.0 + zr * zr)
}

/// AC Stark shift of the probe transition at `r`, proportional to the local
/// intensity of the paraxial Gaussian trap beam.
pub fn ac_stark_shift(r: &Vector3<f64>, trap: &TrapConfig, peak_shift: f64) -> f64 {
    let zr = r.z / trap.rayleigh_range();
    let spread = 1.0 + zr * zr;
    let w2 = trap.waist * trap.waist * spread;
    let rho2 = r.x * r.x + r.y * r.y;
    peak_shift * (-2.0 * rho2 / w2).exp() / spread
}

/// Linear Zeeman shift of a transition, ω_z = μ_B B (g'm' − g m)/ħ, rad/s.
pub fn zeeman_shift(bias_field: f64, g_lower: f64, m_lower: i32, g_upper: f64, m_upper: i32) -> f64 {
    MU_B * bias_field * (g_upper * m_upper as f64 - g_lower * m_lower as f64) / HBAR
}
