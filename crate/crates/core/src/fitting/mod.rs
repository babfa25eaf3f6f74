//! Weighted nonlinear least squares for the lineshape models.
//!
//! The solver is a bound-projected Levenberg–Marquardt iteration on the
//! weighted residuals r_i = (f(x_i; θ) − y_i)/σ_i. The normal matrix is
//! Jacobi-scaled to unit diagonal before each solve, so parameters of very
//! different magnitude (linewidths in rad/s next to a dimensionless overlap)
//! are handled without conditioning trouble. Jacobians are forward finite
//! differences with a per-parameter relative step.

mod models;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use models::{LinearModel, Model, ModelKind, ReflectionModel, SaturationModel, TransmissionModel};

use crate::error::Error as CrateError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub x: f64,
    pub y: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const FREE: Bounds = Bounds { lower: f64::NEG_INFINITY, upper: f64::INFINITY };

    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when an accepted step lowers χ² by less than this fraction.
    pub chi2_rel_tol: f64,
    /// Converged when the relative step norm falls below this.
    pub step_tol: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            chi2_rel_tol: 1e-10,
            step_tol: 1e-12,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub param_names: Vec<String>,
    pub params: Vec<f64>,
    /// Inverse of the weighted normal matrix at the optimum.
    pub covariance: Vec<Vec<f64>>,
    pub chi_squared: f64,
    pub reduced_chi_squared: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_points: usize,
    /// False when the covariance has a negative eigenvalue.
    pub covariance_psd: bool,
    /// χ² after each accepted step, starting with the initial point.
    pub chi2_history: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("invalid fit problem: {0}")]
    InvalidProblem(String),

    #[error("normal matrix is singular; degenerate parameter combination: {combination}")]
    RankDeficient { combination: String },

    #[error("no convergence after {} iterations (χ² = {})", .best.iterations, .best.chi_squared)]
    NotConverged { best: Box<FitResult> },
}

/// A weighted least-squares problem for one model.
pub struct FitProblem {
    pub model: Box<dyn Model>,
    pub rows: Vec<DataRow>,
    pub initial: Vec<f64>,
    pub bounds: Vec<Bounds>,
    /// Rows dropped while building the problem (e.g. zero reference counts).
    pub excluded_rows: usize,
}

impl std::fmt::Debug for FitProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FitProblem")
            .field("params", &self.model.param_names())
            .field("rows", &self.rows.len())
            .field("initial", &self.initial)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl FitProblem {
    pub fn new(
        model: Box<dyn Model>,
        rows: Vec<DataRow>,
        initial: Vec<f64>,
        bounds: Vec<Bounds>,
    ) -> Result<Self, FitError> {
        let problem = Self { model, rows, initial, bounds, excluded_rows: 0 };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        let np = self.model.n_params();
        if self.initial.len() != np || self.bounds.len() != np {
            return Err(FitError::InvalidProblem(format!(
                "model has {np} parameters but {} initial values and {} bounds were given",
                self.initial.len(),
                self.bounds.len()
            )));
        }
        if self.rows.len() < np + 1 {
            return Err(FitError::InvalidProblem(format!(
                "{} data points cannot constrain {np} parameters",
                self.rows.len()
            )));
        }
        if let Some((i, r)) = self
            .rows
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.sigma > 0.0) || !r.x.is_finite() || !r.y.is_finite() || !r.sigma.is_finite())
        {
            return Err(FitError::InvalidProblem(format!(
                "row {i} has invalid values (x={}, y={}, sigma={})",
                r.x, r.y, r.sigma
            )));
        }
        if self.initial.iter().any(|v| !v.is_finite()) {
            return Err(FitError::InvalidProblem("initial guess is not finite".into()));
        }
        Ok(())
    }

    /// Transmission problem with the data-driven start: Γ = Γ0, δω at the
    /// grid minimum, Λ from the observed dip on the Λ ≤ 1/2 branch of
    /// ε = 4Λ(1 − Λ), φ = 0.
    pub fn transmission(rows: Vec<DataRow>, natural_linewidth: f64) -> Result<Self, FitError> {
        let min = rows
            .iter()
            .min_by(|a, b| a.y.total_cmp(&b.y))
            .ok_or_else(|| FitError::InvalidProblem("no data rows".into()))?;
        let eps = (1.0 - min.y).clamp(0.0, 1.0);
        let overlap = (0.5 * (1.0 - (1.0 - eps).sqrt())).clamp(1e-6, 0.5);
        let initial = vec![natural_linewidth, min.x, overlap, 0.0];
        let bounds = vec![
            Bounds::new(1e-6 * natural_linewidth, f64::INFINITY),
            Bounds::FREE,
            Bounds::new(0.0, 0.5),
            Bounds::new(-std::f64::consts::PI, std::f64::consts::PI),
        ];
        Self::new(Box::new(TransmissionModel), rows, initial, bounds)
    }

    /// Backscatter problem started at the grid maximum with Γ = Γ0.
    pub fn reflection(rows: Vec<DataRow>, natural_linewidth: f64) -> Result<Self, FitError> {
        let max = rows
            .iter()
            .max_by(|a, b| a.y.total_cmp(&b.y))
            .ok_or_else(|| FitError::InvalidProblem("no data rows".into()))?;
        let initial = vec![max.y.clamp(0.0, 1.0), natural_linewidth, max.x];
        let bounds = vec![
            Bounds::new(0.0, 1.0),
            Bounds::new(1e-6 * natural_linewidth, f64::INFINITY),
            Bounds::FREE,
        ];
        Self::new(Box::new(ReflectionModel), rows, initial, bounds)
    }

    /// Saturation problem; P_sat starts at the median incident power and η is
    /// solved from the highest-power point.
    pub fn saturation(rows: Vec<DataRow>, natural_linewidth: f64) -> Result<Self, FitError> {
        if rows.is_empty() {
            return Err(FitError::InvalidProblem("no data rows".into()));
        }
        let mut xs: Vec<f64> = rows.iter().map(|r| r.x).collect();
        xs.sort_by(f64::total_cmp);
        let p_sat = xs[xs.len() / 2].max(f64::MIN_POSITIVE);
        let top = rows.iter().max_by(|a, b| a.x.total_cmp(&b.x)).expect("non-empty");
        let eta = if top.x > 0.0 {
            (2.0 * top.y * (top.x + p_sat) / (natural_linewidth * top.x)).clamp(1e-9, 1.0)
        } else {
            0.01
        };
        let bounds = vec![Bounds::new(0.0, f64::INFINITY), Bounds::new(0.0, 1.0)];
        Self::new(Box::new(SaturationModel { natural_linewidth }), rows, vec![p_sat, eta], bounds)
    }

    pub fn for_kind(kind: ModelKind, rows: Vec<DataRow>, natural_linewidth: f64) -> Result<Self, FitError> {
        match kind {
            ModelKind::Transmission => Self::transmission(rows, natural_linewidth),
            ModelKind::Reflection => Self::reflection(rows, natural_linewidth),
            ModelKind::Saturation => Self::saturation(rows, natural_linewidth),
        }
    }

    pub fn n_params(&self) -> usize {
        self.model.n_params()
    }

    fn clamp(&self, p: &mut [f64]) {
        for (v, b) in p.iter_mut().zip(&self.bounds) {
            *v = b.clamp(*v);
        }
    }

    fn residuals(&self, p: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| (self.model.eval(r.x, p) - r.y) / r.sigma),
        )
    }

    /// Σ[(y − f(x; θ))/σ]²
    pub fn chi_squared(&self, p: &[f64]) -> f64 {
        self.residuals(p).norm_squared()
    }

    fn step_size(&self, p: &[f64], j: usize, rel: f64) -> f64 {
        let scale = self.model.fd_scale(j, p);
        let h = if scale > 0.0 { rel * scale } else { rel };
        // step inward when the forward point would leave the box
        if p[j] + h > self.bounds[j].upper {
            -h
        } else {
            h
        }
    }
}

/// Forward-difference Jacobian of the weighted residuals, ∂r_i/∂θ_j.
pub fn jacobian_forward(problem: &FitProblem, p: &[f64], rel_step: f64) -> DMatrix<f64> {
    let n = problem.rows.len();
    let np = p.len();
    let base = problem.residuals(p);
    let mut jac = DMatrix::zeros(n, np);
    let mut q = p.to_vec();
    for j in 0..np {
        let h = problem.step_size(p, j, rel_step);
        q[j] = p[j] + h;
        let h = q[j] - p[j];
        let shifted = problem.residuals(&q);
        for i in 0..n {
            jac[(i, j)] = (shifted[i] - base[i]) / h;
        }
        q[j] = p[j];
    }
    jac
}

/// Central-difference Jacobian of the weighted residuals.
pub fn jacobian_central(problem: &FitProblem, p: &[f64], rel_step: f64) -> DMatrix<f64> {
    let n = problem.rows.len();
    let np = p.len();
    let mut jac = DMatrix::zeros(n, np);
    let mut q = p.to_vec();
    for j in 0..np {
        let h = problem.step_size(p, j, rel_step).abs();
        q[j] = p[j] + h;
        let up = problem.residuals(&q);
        q[j] = p[j] - h;
        let down = problem.residuals(&q);
        for i in 0..n {
            jac[(i, j)] = (up[i] - down[i]) / (2.0 * h);
        }
        q[j] = p[j];
    }
    jac
}

fn describe_combination(names: &[String], v: &DVector<f64>) -> String {
    let mut parts: Vec<String> = v
        .iter()
        .zip(names)
        .filter(|(c, _)| c.abs() > 0.05)
        .map(|(c, n)| format!("{c:+.3}·{n}"))
        .collect();
    if parts.is_empty() {
        parts.push("(numerically null)".into());
    }
    parts.join(" ")
}

/// Jacobi-scaled normal matrix D⁻¹JᵀJD⁻¹, gradient D⁻¹Jᵀr and the scales D.
fn scaled_normal(jac: &DMatrix<f64>, r: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let jtj = jac.transpose() * jac;
    let g = jac.transpose() * r;
    let np = jtj.nrows();
    let d = DVector::from_iterator(np, (0..np).map(|j| {
        let v = jtj[(j, j)].sqrt();
        if v > 0.0 && v.is_finite() {
            v
        } else {
            1.0
        }
    }));
    let mut ns = jtj;
    for i in 0..np {
        for j in 0..np {
            ns[(i, j)] /= d[i] * d[j];
        }
    }
    let gs = g.component_div(&d);
    (ns, gs, d)
}

/// Covariance (JᵀJ)⁻¹ at `p`, or a rank-deficiency error naming the null
/// direction.
fn covariance_at(problem: &FitProblem, p: &[f64], rel_step: f64) -> Result<(DMatrix<f64>, bool), FitError> {
    let jac = jacobian_forward(problem, p, rel_step);
    let names = problem.model.param_names();
    let np = p.len();
    for j in 0..np {
        if jac.column(j).iter().all(|v| *v == 0.0) {
            let mut v = DVector::zeros(np);
            v[j] = 1.0;
            return Err(FitError::RankDeficient { combination: describe_combination(&names, &v) });
        }
    }
    let r = problem.residuals(p);
    let (ns, _, d) = scaled_normal(&jac, &r);
    let eig = SymmetricEigen::new(ns.clone());
    let (imin, emin) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one parameter");
    let emax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    if !(emin > 1e-13 * emax) {
        let v = eig.eigenvectors.column(imin).into_owned();
        return Err(FitError::RankDeficient { combination: describe_combination(&names, &v) });
    }
    // (D N D)⁻¹ = D⁻¹ N⁻¹ D⁻¹ via the eigendecomposition of N
    let inv = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e))
        * eig.eigenvectors.transpose();
    let mut cov = inv;
    for i in 0..np {
        for j in 0..np {
            cov[(i, j)] /= d[i] * d[j];
        }
    }
    // symmetrize away rounding
    let cov = (&cov + cov.transpose()) * 0.5;
    let psd = SymmetricEigen::new(cov.clone())
        .eigenvalues
        .iter()
        .all(|e| *e >= -1e-12 * cov.diagonal().abs().max());
    Ok((cov, psd))
}

/// Fits with default options.
pub fn fit(problem: &FitProblem) -> Result<FitResult, FitError> {
    fit_with(problem, &FitOptions::default())
}

pub fn fit_with(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult, FitError> {
    problem.validate()?;
    let np = problem.n_params();
    let n = problem.rows.len();
    let mut p = problem.initial.clone();
    problem.clamp(&mut p);
    let mut r = problem.residuals(&p);
    let mut chi2 = r.norm_squared();
    if !chi2.is_finite() {
        return Err(FitError::InvalidProblem("model is not finite at the initial guess".into()));
    }
    let mut history = vec![chi2];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        if chi2 == 0.0 {
            converged = true;
            break;
        }
        let jac = jacobian_forward(problem, &p, opts.fd_step);
        let (ns, gs, d) = scaled_normal(&jac, &r);
        let mut accepted = false;
        while lambda <= 1e16 {
            let mut a = ns.clone();
            for i in 0..np {
                a[(i, i)] += lambda;
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&gs)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut trial = p.clone();
            for j in 0..np {
                trial[j] += step[j] / d[j];
            }
            problem.clamp(&mut trial);
            let r_trial = problem.residuals(&trial);
            let chi2_trial = r_trial.norm_squared();
            if chi2_trial.is_finite() && chi2_trial < chi2 {
                let rel_step = trial
                    .iter()
                    .zip(&p)
                    .enumerate()
                    .map(|(j, (t, o))| {
                        let scale = problem.model.fd_scale(j, &p).max(f64::MIN_POSITIVE);
                        ((t - o) / scale).powi(2)
                    })
                    .sum::<f64>()
                    .sqrt();
                let rel_drop = (chi2 - chi2_trial) / chi2;
                p = trial;
                r = r_trial;
                chi2 = chi2_trial;
                history.push(chi2);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel_drop < opts.chi2_rel_tol || rel_step < opts.step_tol || chi2 == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step exists at any damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }

    let dof = n - np;
    let (cov, psd) = covariance_at(problem, &p, opts.fd_step)?;
    let result = FitResult {
        param_names: problem.model.param_names(),
        params: p,
        covariance: (0..np).map(|i| (0..np).map(|j| cov[(i, j)]).collect()).collect(),
        chi_squared: chi2,
        reduced_chi_squared: chi2 / dof as f64,
        converged,
        iterations,
        n_points: n,
        covariance_psd: psd,
        chi2_history: history,
    };
    if !converged {
        return Err(FitError::NotConverged { best: Box::new(result) });
    }
    Ok(result)
}

/// χ²/(n − p) of `result`'s parameters evaluated on `problem`'s data.
pub fn reduced_chi_squared(result: &FitResult, problem: &FitProblem) -> Result<f64, CrateError> {
    let n = problem.rows.len();
    let np = result.params.len();
    if n <= np {
        return Err(CrateError::Domain(format!(
            "no degrees of freedom: {n} points, {np} parameters"
        )));
    }
    Ok(problem.chi_squared(&result.params) / (n - np) as f64)
}

/// One-standard-deviation parameter errors from the covariance diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterErrors {
    pub std_errors: Vec<f64>,
    /// Set when the covariance is not positive semidefinite; entries with a
    /// negative variance are NaN.
    pub flagged: bool,
}

pub fn parameter_uncertainties(result: &FitResult) -> ParameterErrors {
    let std_errors: Vec<f64> = (0..result.params.len())
        .map(|i| {
            let v = result.covariance[i][i];
            if v >= 0.0 {
                v.sqrt()
            } else {
                f64::NAN
            }
        })
        .collect();
    let flagged = !result.covariance_psd || std_errors.iter().any(|e| e.is_nan());
    ParameterErrors { std_errors, flagged }
}
