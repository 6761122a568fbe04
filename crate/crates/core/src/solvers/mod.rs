//! Nonlinear solvers for `F_h(u) = 0`, all written as
//! `u <- u - P[u]^{-1} F_h(u)` for an operator preconditioner `P[u]`:
//!
//! * Zarantonello: `P = R / delta_Z` with the Riesz matrix `R`,
//! * Kacanov: `P[u] = A(u)`, the stiffness with the coefficient frozen at `u`,
//! * Newton: `P[u] = F'(u) / delta_N`.
//!
//! The same preconditioners define the inner products of the preconditioned
//! nonlinear conjugate gradient method in [`pncg_run`]. Its first direction
//! is exactly the fixed-point update, i.e. the steepest descent direction of
//! the energy with respect to the `P[u]` inner product.

mod line_search;
mod runs;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{CoefficientVector, FemSystem};
use crate::linalg::{dot, LinalgError};

pub use line_search::{line_search, LineSearchConfig, LineSearchOutcome};
pub use runs::{
    fixed_point_run, fixed_point_run_with, iterate_fixed_point, newton_to_residual, pncg_run,
    pncg_run_with, run, IterationLog, IterationRecord, RunControl, StepRule,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("linear solve failed at step {step}: {source}")]
    Linalg {
        step: usize,
        #[source]
        source: LinalgError,
    },
    #[error("conjugacy parameter undefined: F(u^n)^T P^-1 F(u^n) = {0:e}")]
    ZeroDenominator(f64),
    #[error("system has no degrees of freedom")]
    EmptySystem,
    #[error("vector length {found} does not match {expected} degrees of freedom")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("residual norm {residual:e} above {target:e} after {steps} steps")]
    NotConverged {
        steps: usize,
        residual: f64,
        target: f64,
    },
}

impl SolverError {
    pub(crate) fn at_step(step: usize) -> impl Fn(LinalgError) -> SolverError {
        move |source| SolverError::Linalg { step, source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Zarantonello,
    Kacanov,
    Newton,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Zarantonello, Method::Kacanov, Method::Newton];

    pub fn label(&self) -> &'static str {
        match self {
            Method::Zarantonello => "Zarantonello",
            Method::Kacanov => "Kacanov",
            Method::Newton => "Newton",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FixedPoint,
    Pncg,
}

/// Conjugacy parameter of the nonlinear CG update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaRule {
    FletcherReeves,
    PolakRibierePlus,
    /// `beta = 0`: preconditioned steepest descent.
    Zero,
}

impl BetaRule {
    pub fn label(&self) -> &'static str {
        match self {
            BetaRule::FletcherReeves => "FR",
            BetaRule::PolakRibierePlus => "PR+",
            BetaRule::Zero => "none",
        }
    }
}

fn default_delta() -> f64 {
    0.03
}
fn default_one() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    100
}
fn default_beta() -> BetaRule {
    BetaRule::FletcherReeves
}

/// One solver run: method, fixed-point or PNCG mode, damping and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub mode: Mode,
    #[serde(default = "default_beta")]
    pub beta_rule: BetaRule,
    #[serde(default = "default_delta")]
    pub delta_z: f64,
    #[serde(default = "default_one")]
    pub delta_n: f64,
    #[serde(default = "default_tol")]
    pub tol_x: f64,
    /// Measure `||u^n - u_ref||_X / ||u_ref||_X` instead of the absolute error.
    #[serde(default)]
    pub relative_tol: bool,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub line_search: LineSearchConfig,
}

impl SolverConfig {
    pub fn new(method: Method, mode: Mode) -> Self {
        Self {
            method,
            mode,
            beta_rule: default_beta(),
            delta_z: default_delta(),
            delta_n: default_one(),
            tol_x: default_tol(),
            relative_tol: false,
            max_iter: default_max_iter(),
            line_search: LineSearchConfig::default(),
        }
    }

    pub fn pncg(method: Method, beta_rule: BetaRule) -> Self {
        Self {
            beta_rule,
            ..Self::new(method, Mode::Pncg)
        }
    }

    pub fn with_delta_z(self, delta_z: f64) -> Self {
        Self { delta_z, ..self }
    }

    pub fn preconditioner(&self) -> OperatorPreconditioner {
        OperatorPreconditioner {
            method: self.method,
            delta_z: self.delta_z,
            delta_n: self.delta_n,
        }
    }

    pub fn control(&self) -> RunControl {
        RunControl {
            tol_x: self.tol_x,
            relative_tol: self.relative_tol,
            max_iter: self.max_iter,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_z > 0.0 && self.delta_n > 0.0) {
            return Err("damping parameters must be positive".into());
        }
        if !(self.tol_x > 0.0) {
            return Err("tol_x must be positive".into());
        }
        if self.max_iter < 1 {
            return Err("max_iter must be at least 1".into());
        }
        self.line_search.validate()
    }

    /// Short label such as `Kacanov/PNCG-FR`.
    pub fn label(&self) -> String {
        match self.mode {
            Mode::FixedPoint => format!("{}/FP", self.method.label()),
            Mode::Pncg => format!("{}/PNCG-{}", self.method.label(), self.beta_rule.label()),
        }
    }
}

/// An iterate-dependent SPD preconditioner `P[u]`.
pub trait Preconditioner {
    /// Returns `P[u]^{-1} rhs`.
    fn apply(&self, sys: &FemSystem, u: &[f64], rhs: &[f64]) -> Result<Vec<f64>, LinalgError>;

    /// Damping logged as the step size of the fixed-point iteration.
    fn damping(&self) -> f64 {
        1.0
    }
}

/// The three operator preconditioners of the model problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorPreconditioner {
    pub method: Method,
    pub delta_z: f64,
    pub delta_n: f64,
}

impl OperatorPreconditioner {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            delta_z: default_delta(),
            delta_n: 1.0,
        }
    }
}

impl Preconditioner for OperatorPreconditioner {
    fn apply(&self, sys: &FemSystem, u: &[f64], rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let scale = |mut v: Vec<f64>, s: f64| {
            v.iter_mut().for_each(|x| *x *= s);
            v
        };
        match self.method {
            Method::Zarantonello => Ok(scale(sys.riesz_solve(rhs)?, self.delta_z)),
            Method::Kacanov => sys.solve(&sys.weighted_stiffness(u), rhs),
            Method::Newton => Ok(scale(sys.solve(&sys.newton_jacobian(u), rhs)?, self.delta_n)),
        }
    }

    fn damping(&self) -> f64 {
        match self.method {
            Method::Zarantonello => self.delta_z,
            Method::Kacanov => 1.0,
            Method::Newton => self.delta_n,
        }
    }
}

/// `P[u]^{-1} rhs` for the given method.
pub fn precond_apply(
    precond: &OperatorPreconditioner,
    sys: &FemSystem,
    u: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, LinalgError> {
    precond.apply(sys, u, rhs)
}

/// One step `u - P[u]^{-1} F_h(u)` of the unified fixed-point iteration.
pub fn fixed_point_step(
    precond: &dyn Preconditioner,
    sys: &FemSystem,
    u: &[f64],
) -> Result<CoefficientVector, LinalgError> {
    let correction = precond.apply(sys, u, &sys.residual(u))?;
    Ok(u.iter().zip(&correction).map(|(a, c)| a - c).collect::<Vec<_>>().into())
}

/// Residual `F_h(u)` together with its preconditioned image `P[u]^{-1} F_h(u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionedResidual {
    pub residual: Vec<f64>,
    pub preconditioned: Vec<f64>,
}

impl PreconditionedResidual {
    pub fn compute(
        precond: &dyn Preconditioner,
        sys: &FemSystem,
        u: &[f64],
    ) -> Result<Self, LinalgError> {
        let residual = sys.residual(u);
        let preconditioned = precond.apply(sys, u, &residual)?;
        Ok(Self {
            residual,
            preconditioned,
        })
    }

    /// `F^T P^{-1} F`.
    pub fn dual_norm_sq(&self) -> f64 {
        dot(&self.residual, &self.preconditioned)
    }
}

fn denominator(prev: &PreconditionedResidual) -> Result<f64, SolverError> {
    let den = prev.dual_norm_sq();
    if den > 0.0 {
        Ok(den)
    } else {
        Err(SolverError::ZeroDenominator(den))
    }
}

/// Fletcher-Reeves: `F_{n+1}^T P_{n+1}^{-1} F_{n+1} / F_n^T P_n^{-1} F_n`.
pub fn beta_fr(
    next: &PreconditionedResidual,
    prev: &PreconditionedResidual,
) -> Result<f64, SolverError> {
    Ok(next.dual_norm_sq() / denominator(prev)?)
}

/// Polak-Ribiere, clipped at zero:
/// `max(0, (F_{n+1} - F_n)^T P_{n+1}^{-1} F_{n+1} / F_n^T P_n^{-1} F_n)`.
pub fn beta_pr_plus(
    next: &PreconditionedResidual,
    prev: &PreconditionedResidual,
) -> Result<f64, SolverError> {
    let den = denominator(prev)?;
    let num: f64 = next
        .residual
        .iter()
        .zip(&prev.residual)
        .zip(&next.preconditioned)
        .map(|((fn1, f0), z)| (fn1 - f0) * z)
        .sum();
    Ok((num / den).max(0.0))
}

pub fn beta(
    rule: BetaRule,
    next: &PreconditionedResidual,
    prev: &PreconditionedResidual,
) -> Result<f64, SolverError> {
    match rule {
        BetaRule::FletcherReeves => beta_fr(next, prev),
        BetaRule::PolakRibierePlus => beta_pr_plus(next, prev),
        BetaRule::Zero => Ok(0.0),
    }
}
