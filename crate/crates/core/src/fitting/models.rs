use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::spectra::{backscatter_rate, reflection_at, transmission_at, LineshapeParams, SaturationParams};

/// A scalar model y = f(x; θ).
pub trait Model: Send + Sync {
    fn param_names(&self) -> Vec<String>;

    fn eval(&self, x: f64, params: &[f64]) -> f64;

    /// Characteristic magnitude of parameter `index`, used to size the
    /// finite-difference step. Defaults to |θ_index|.
    fn fd_scale(&self, index: usize, params: &[f64]) -> f64 {
        params[index].abs()
    }

    fn n_params(&self) -> usize {
        self.param_names().len()
    }
}

/// Built-in lineshape models selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Transmission,
    Reflection,
    Saturation,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Transmission => "transmission",
            ModelKind::Reflection => "reflection",
            ModelKind::Saturation => "saturation",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transmission" => Ok(ModelKind::Transmission),
            "reflection" => Ok(ModelKind::Reflection),
            "saturation" => Ok(ModelKind::Saturation),
            other => Err(format!("unknown model '{other}' (expected transmission, reflection or saturation)")),
        }
    }
}

/// τ(x) with θ = (Γ, δω, Λ, φ) and A = ΓΛ; x is the detuning ω_p − ω0.
#[derive(Debug, Clone, Copy, Default)]
pub struct TransmissionModel;

impl TransmissionModel {
    pub const NAMES: [&'static str; 4] = ["linewidth", "shift", "overlap", "phase"];

    pub fn params(theta: &[f64]) -> LineshapeParams {
        LineshapeParams::matched(theta[0], theta[1], theta[2], theta[3])
    }
}

impl Model for TransmissionModel {
    fn param_names(&self) -> Vec<String> {
        Self::NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        transmission_at(&Self::params(p), x)
    }

    fn fd_scale(&self, index: usize, p: &[f64]) -> f64 {
        match index {
            // the shift lives on the detuning axis, whose natural unit is Γ
            1 => p[0].abs(),
            2 => p[2].abs().max(1e-3),
            3 => p[3].abs().max(1.0),
            _ => p[index].abs(),
        }
    }
}

/// P_b(x) with θ = (P_b0, Γ, δω); x is the detuning ω_p − ω0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReflectionModel;

impl ReflectionModel {
    pub const NAMES: [&'static str; 3] = ["resonant_probability", "linewidth", "shift"];
}

impl Model for ReflectionModel {
    fn param_names(&self) -> Vec<String> {
        Self::NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        reflection_at(p[0], p[1], p[2], x)
    }

    fn fd_scale(&self, index: usize, p: &[f64]) -> f64 {
        match index {
            2 => p[1].abs(),
            _ => p[index].abs(),
        }
    }
}

/// R_b(x) with θ = (P_sat, η); x is the incident power P_inc.
#[derive(Debug, Clone, Copy)]
pub struct SaturationModel {
    /// Γ0, rad/s
    pub natural_linewidth: f64,
}

impl SaturationModel {
    pub const NAMES: [&'static str; 2] = ["p_sat", "eta"];
}

impl Model for SaturationModel {
    fn param_names(&self) -> Vec<String> {
        Self::NAMES.iter().map(|s| s.to_string()).collect()
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        backscatter_rate(&SaturationParams { p_sat: p[0], eta: p[1], p_inc: x }, self.natural_linewidth)
    }
}

/// Straight line y = θ0 + θ1·x.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearModel;

impl Model for LinearModel {
    fn param_names(&self) -> Vec<String> {
        vec!["intercept".into(), "slope".into()]
    }

    fn eval(&self, x: f64, p: &[f64]) -> f64 {
        p[0] + p[1] * x
    }

    fn fd_scale(&self, index: usize, p: &[f64]) -> f64 {
        p[index].abs().max(1.0)
    }
}
