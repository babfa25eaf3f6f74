//! Physical constants (CODATA 2018) and rubidium-87 D2 line data.
//!
//! Every regression value in the crate is computed from this one table.

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J s.
pub const H: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Unified atomic mass unit, kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Mass of ⁸⁷Rb, kg.
pub const RB87_MASS: f64 = 86.909_180_527 * AMU;
/// Vacuum wavelength of the ⁸⁷Rb D2 line, m.
pub const RB87_D2_WAVELENGTH: f64 = 780.241_209_686e-9;
/// Natural linewidth of the D2 line, Hz (divide-by-2π convention).
pub const RB87_D2_LINEWIDTH_HZ: f64 = 6.07e6;

/// Converts a frequency in MHz (per 2π) to an angular frequency in rad/s.
pub fn mhz_to_rad(mhz: f64) -> f64 {
    2.0 * PI * mhz * 1e6
}

/// Converts an angular frequency in rad/s to MHz (per 2π).
pub fn rad_to_mhz(rad: f64) -> f64 {
    rad / (2.0 * PI * 1e6)
}

/// Converts kHz (per 2π) to rad/s.
pub fn khz_to_rad(khz: f64) -> f64 {
    2.0 * PI * khz * 1e3
}

pub fn rad_to_khz(rad: f64) -> f64 {
    rad / (2.0 * PI * 1e3)
}
