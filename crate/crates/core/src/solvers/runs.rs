use crate::fem::{CoefficientVector, FemSystem};
use crate::linalg::norm2;

use super::{
    beta, fixed_point_step, line_search, BetaRule, LineSearchConfig, Mode, Preconditioner,
    PreconditionedResidual, SolverConfig, SolverError,
};

/// Stopping rule shared by all runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunControl {
    pub tol_x: f64,
    pub relative_tol: bool,
    pub max_iter: usize,
}

/// How PNCG picks its step length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    LineSearch(LineSearchConfig),
    /// Fixed `alpha`; with `beta = 0` and `alpha = 1` PNCG is the fixed-point iteration.
    Fixed(f64),
}

/// State after step `step`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub step: usize,
    /// `||u^n - u_ref||_X`.
    pub error_x: f64,
    pub energy: f64,
    /// Step size that produced this iterate (damping for fixed-point runs).
    pub alpha: Option<f64>,
    /// Conjugacy parameter computed at this iterate.
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    /// First step at which the tolerance held; `None` renders as `-`.
    pub steps_to_tol: Option<usize>,
    /// `||u_ref||_X`, for converting errors to relative ones.
    pub reference_norm: f64,
    pub final_iterate: CoefficientVector,
}

impl IterationLog {
    pub fn steps_label(&self) -> String {
        self.steps_to_tol.map_or_else(|| "-".to_owned(), |s| s.to_string())
    }

    /// CSV with header `step,error_X,energy,alpha,beta`; missing values are left empty.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("step,error_X,energy,alpha,beta\n");
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:e}"));
        for r in &self.records {
            out.push_str(&format!(
                "{},{:e},{:e},{},{}\n",
                r.step,
                r.error_x,
                r.energy,
                opt(r.alpha),
                opt(r.beta)
            ));
        }
        out
    }
}

struct Recorder<'a> {
    sys: &'a FemSystem,
    u_ref: &'a [f64],
    control: RunControl,
    log: IterationLog,
}

impl<'a> Recorder<'a> {
    fn new(sys: &'a FemSystem, u_ref: &'a [f64], control: RunControl) -> Result<Self, SolverError> {
        if sys.num_dofs() == 0 {
            return Err(SolverError::EmptySystem);
        }
        if u_ref.len() != sys.num_dofs() {
            return Err(SolverError::DimensionMismatch {
                expected: sys.num_dofs(),
                found: u_ref.len(),
            });
        }
        Ok(Self {
            sys,
            u_ref,
            control,
            log: IterationLog {
                records: Vec::new(),
                converged: false,
                steps_to_tol: None,
                reference_norm: sys.x_norm(u_ref),
                final_iterate: CoefficientVector::default(),
            },
        })
    }

    /// Logs `u` as iterate `step`; returns true once the tolerance is met.
    fn record(&mut self, step: usize, u: &[f64], alpha: Option<f64>) -> bool {
        let error_x = self.sys.x_norm(&difference(u, self.u_ref));
        self.log.records.push(IterationRecord {
            step,
            error_x,
            energy: self.sys.energy(u),
            alpha,
            beta: None,
        });
        let measured = if self.control.relative_tol {
            error_x / self.log.reference_norm
        } else {
            error_x
        };
        if measured <= self.control.tol_x {
            self.log.converged = true;
            self.log.steps_to_tol = Some(step);
        }
        self.log.converged
    }

    fn set_beta(&mut self, beta: f64) {
        if let Some(last) = self.log.records.last_mut() {
            last.beta = Some(beta);
        }
    }

    fn finish(mut self, u: CoefficientVector) -> IterationLog {
        self.log.final_iterate = u;
        self.log
    }
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Runs the configured method and mode from `u^0 = 0`.
pub fn run(sys: &FemSystem, cfg: &SolverConfig, u_ref: &[f64]) -> Result<IterationLog, SolverError> {
    match cfg.mode {
        Mode::FixedPoint => fixed_point_run(sys, cfg, u_ref),
        Mode::Pncg => pncg_run(sys, cfg, u_ref),
    }
}

/// Fixed-point iteration `u <- u - P[u]^{-1} F_h(u)` from `u^0 = 0`.
pub fn fixed_point_run(sys: &FemSystem, cfg: &SolverConfig, u_ref: &[f64]) -> Result<IterationLog, SolverError> {
    fixed_point_run_with(sys, &cfg.preconditioner(), cfg.control(), sys.zero_vector(), u_ref)
}

pub fn fixed_point_run_with(
    sys: &FemSystem,
    precond: &dyn Preconditioner,
    control: RunControl,
    u0: CoefficientVector,
    u_ref: &[f64],
) -> Result<IterationLog, SolverError> {
    let mut rec = Recorder::new(sys, u_ref, control)?;
    let mut u = u0;
    if rec.record(0, &u, None) {
        return Ok(rec.finish(u));
    }
    for n in 0..control.max_iter {
        u = fixed_point_step(precond, sys, &u).map_err(SolverError::at_step(n))?;
        if rec.record(n + 1, &u, Some(precond.damping())) {
            break;
        }
    }
    Ok(rec.finish(u))
}

/// Preconditioned nonlinear conjugate gradients from `u^0 = 0`.
pub fn pncg_run(sys: &FemSystem, cfg: &SolverConfig, u_ref: &[f64]) -> Result<IterationLog, SolverError> {
    pncg_run_with(
        sys,
        &cfg.preconditioner(),
        cfg.beta_rule,
        StepRule::LineSearch(cfg.line_search),
        cfg.control(),
        sys.zero_vector(),
        u_ref,
    )
}

/// PNCG with an arbitrary preconditioner and step rule:
///
/// ```text
/// d^0 = -P(u^0)^{-1} F(u^0)
/// repeat
///     u^{n+1} = u^n + alpha^n d^n
///     d^{n+1} = -P(u^{n+1})^{-1} F(u^{n+1}) + beta^n d^n
/// ```
pub fn pncg_run_with(
    sys: &FemSystem,
    precond: &dyn Preconditioner,
    beta_rule: BetaRule,
    step_rule: StepRule,
    control: RunControl,
    u0: CoefficientVector,
    u_ref: &[f64],
) -> Result<IterationLog, SolverError> {
    let mut rec = Recorder::new(sys, u_ref, control)?;
    let mut u = u0;
    if rec.record(0, &u, None) {
        return Ok(rec.finish(u));
    }
    let mut current = PreconditionedResidual::compute(precond, sys, &u).map_err(SolverError::at_step(0))?;
    let mut d: Vec<f64> = current.preconditioned.iter().map(|z| -z).collect();
    for n in 0..control.max_iter {
        let alpha = match step_rule {
            StepRule::LineSearch(cfg) => line_search(sys, &u, &d, &cfg).alpha,
            StepRule::Fixed(alpha) => alpha,
        };
        u.axpy(alpha, &d);
        if rec.record(n + 1, &u, Some(alpha)) || n + 1 == control.max_iter {
            break;
        }
        let next = PreconditionedResidual::compute(precond, sys, &u).map_err(SolverError::at_step(n + 1))?;
        let b = beta(beta_rule, &next, &current)?;
        rec.set_beta(b);
        for (di, zi) in d.iter_mut().zip(&next.preconditioned) {
            *di = -zi + b * *di;
        }
        current = next;
    }
    Ok(rec.finish(u))
}

/// Exactly `steps` fixed-point steps, without a stopping test.
pub fn iterate_fixed_point(
    sys: &FemSystem,
    precond: &dyn Preconditioner,
    mut u: CoefficientVector,
    steps: usize,
) -> Result<CoefficientVector, SolverError> {
    for n in 0..steps {
        u = fixed_point_step(precond, sys, &u).map_err(SolverError::at_step(n))?;
    }
    Ok(u)
}

/// Fixed-point steps until `||F_h(u)||_2 <= tol`, at most `max_steps`.
pub fn newton_to_residual(
    sys: &FemSystem,
    precond: &dyn Preconditioner,
    mut u: CoefficientVector,
    tol: f64,
    max_steps: usize,
) -> Result<CoefficientVector, SolverError> {
    let mut residual = norm2(&sys.residual(&u));
    for n in 0..max_steps {
        if residual <= tol {
            return Ok(u);
        }
        u = fixed_point_step(precond, sys, &u).map_err(SolverError::at_step(n))?;
        residual = norm2(&sys.residual(&u));
    }
    if residual <= tol {
        Ok(u)
    } else {
        Err(SolverError::NotConverged {
            steps: max_steps,
            residual,
            target: tol,
        })
    }
}
