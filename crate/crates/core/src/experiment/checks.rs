use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{CoefficientVector, FemSystem};
use crate::linalg::dot;
use crate::mesh::{build_lshape, LSHAPE_AREA};
use crate::solvers::{
    fixed_point_run_with, pncg_run_with, BetaRule, LineSearchConfig, Method, OperatorPreconditioner, RunControl,
    StepRule,
};

use super::config::ExperimentConfig;
use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// One property check. `worst_margin` is the smallest slack seen; negative
/// values are violations. `detail` says how the margin is measured.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: &'static str,
    pub status: CheckStatus,
    pub worst_margin: f64,
    pub samples: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub entries: Vec<CheckEntry>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != CheckStatus::Fail)
    }

    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let status = match e.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            writeln!(
                out,
                "{status} {:<22} samples={:<5} worst_margin={:+.3e}  {}",
                e.name, e.samples, e.worst_margin, e.detail
            )
            .unwrap();
        }
        writeln!(out, "{}", if self.passed() { "all checks passed" } else { "some checks FAILED" }).unwrap();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    pub seed: u64,
    /// Scalar samples for the coefficient sandwich.
    pub mu_samples: usize,
    /// Pairs for strong monotonicity and Lipschitz continuity.
    pub operator_pairs: usize,
    pub gradient_pairs: usize,
    pub fd_eps: f64,
    pub fd_rtol: f64,
    pub spectral_samples: usize,
    /// Steps of every energy-decay run.
    pub decay_steps: usize,
    pub decay_slack: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            seed: 2024,
            mu_samples: 2000,
            operator_pairs: 50,
            gradient_pairs: 20,
            fd_eps: 1e-6,
            fd_rtol: 1e-5,
            spectral_samples: 20,
            decay_steps: 30,
            decay_slack: 1e-12,
        }
    }
}

/// Smooth random discrete function: a few sine modes with random
/// amplitudes and frequencies plus nodal noise of mesh size.
pub fn random_field(sys: &FemSystem, rng: &mut impl Rng) -> CoefficientVector {
    let modes: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            (
                rng.random_range(-1.0..1.0),
                rng.random_range(1..=3) as f64,
                rng.random_range(1..=3) as f64,
            )
        })
        .collect();
    let h = 0.5f64.powi(sys.mesh().level() as i32);
    let mut u = sys.interpolate(|p| {
        modes
            .iter()
            .map(|(c, a, b)| c * (a * PI * p.x).sin() * (b * PI * p.y).sin())
            .sum()
    });
    u.iter_mut().for_each(|x| *x += 0.1 * h * rng.random_range(-1.0..1.0));
    u
}

fn entry(name: &'static str, worst_margin: f64, samples: usize, detail: String) -> CheckEntry {
    CheckEntry {
        name,
        status: if worst_margin >= 0.0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        worst_margin,
        samples,
        detail,
    }
}

fn skipped(name: &'static str) -> CheckEntry {
    CheckEntry {
        name,
        status: CheckStatus::Skipped,
        worst_margin: f64::NAN,
        samples: 0,
        detail: "no degrees of freedom".into(),
    }
}

/// Coefficient sandwich `m (t - s) <= mu(t^2) t - mu(s^2) s <= M (t - s)`.
pub fn check_mu_sandwich(sys: &FemSystem, opts: &CheckOptions) -> CheckEntry {
    let r = sys.model().check_monotonicity(opts.mu_samples);
    let margin = r.worst_lower_margin.min(r.worst_upper_margin);
    let mut e = entry(
        "mu_sandwich",
        margin,
        r.pairs_checked,
        format!("relative slack to m={} and M={}", r.m_mu, r.upper),
    );
    if !r.passed {
        e.status = CheckStatus::Fail;
    }
    e
}

/// `<F(u) - F(v), u - v> >= m ||u - v||_X^2`.
pub fn check_strong_monotonicity(sys: &FemSystem, opts: &CheckOptions) -> CheckEntry {
    let m = sys.model().lower_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.operator_pairs {
        let (u, v) = (random_field(sys, &mut rng), random_field(sys, &mut rng));
        let d = u.difference(&v);
        let df = difference(&sys.residual(&u), &sys.residual(&v));
        let bound = m * sys.riesz().quad_form(&d);
        worst = worst.min((dot(&df, &d) - bound) / bound);
    }
    entry(
        "strong_monotonicity",
        worst,
        opts.operator_pairs,
        format!("relative slack to m={m}"),
    )
}

/// `|<F(u) - F(v), w>| <= 3M ||u - v||_X ||w||_X`.
pub fn check_lipschitz(sys: &FemSystem, opts: &CheckOptions) -> CheckEntry {
    let big_m = sys.model().upper_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x4c);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.operator_pairs {
        let (u, v, w) = (
            random_field(sys, &mut rng),
            random_field(sys, &mut rng),
            random_field(sys, &mut rng),
        );
        let d = u.difference(&v);
        let df = difference(&sys.residual(&u), &sys.residual(&v));
        let bound = 3.0 * big_m * sys.x_norm(&d) * sys.x_norm(&w);
        worst = worst.min((bound - dot(&df, &w).abs()) / bound);
    }
    entry(
        "lipschitz",
        worst,
        opts.operator_pairs,
        format!("relative slack to 3M={}", 3.0 * big_m),
    )
}

/// Central differences of `H` along `v` against `v^T F(u)`.
pub fn check_gradient(sys: &FemSystem, opts: &CheckOptions) -> CheckEntry {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x6d);
    let eps = opts.fd_eps;
    let mut worst = 0.0f64;
    for _ in 0..opts.gradient_pairs {
        let (u, v) = (random_field(sys, &mut rng), random_field(sys, &mut rng));
        let line = sys.line_energy(&u, &v);
        let fd = (line.delta(eps) - line.delta(-eps)) / (2.0 * eps);
        let exact = dot(&v, &sys.residual(&u));
        worst = worst.max((fd - exact).abs() / exact.abs());
    }
    entry(
        "gradient_fd",
        1.0 - worst / opts.fd_rtol,
        opts.gradient_pairs,
        format!("max relative error {worst:.2e} vs {:.0e} at eps={eps:.0e}", opts.fd_rtol),
    )
}

/// `m v^T R v <= v^T A(u) v <= M v^T R v`.
pub fn check_spectral_sandwich(sys: &FemSystem, opts: &CheckOptions) -> CheckEntry {
    let (m, big_m) = (sys.model().lower_bound(), sys.model().upper_bound());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x53);
    let mut worst = f64::INFINITY;
    for _ in 0..opts.spectral_samples {
        let (u, v) = (random_field(sys, &mut rng), random_field(sys, &mut rng));
        let a = sys.weighted_stiffness(&u).quad_form(&v);
        let r = sys.riesz().quad_form(&v);
        worst = worst.min(a / (m * r) - 1.0).min(1.0 - a / (big_m * r));
    }
    entry(
        "spectral_sandwich",
        worst,
        opts.spectral_samples,
        format!("relative slack to m={m} and M={big_m}"),
    )
}

/// `H(u^{n+1}) <= H(u^n) + slack` along Kacanov FP and all PNCG runs from zero.
pub fn check_energy_decay(sys: &FemSystem, cfg: &ExperimentConfig, opts: &CheckOptions) -> CheckEntry {
    let control = RunControl {
        tol_x: f64::NEG_INFINITY,
        relative_tol: false,
        max_iter: opts.decay_steps,
    };
    // the error column is irrelevant here, so measure against zero
    let zero = sys.zero_vector();
    let delta_z = cfg.solvers.first().map_or(0.03, |s| s.delta_z);
    let precond = |method| OperatorPreconditioner {
        delta_z,
        ..OperatorPreconditioner::new(method)
    };
    let mut logs = vec![fixed_point_run_with(sys, &precond(Method::Kacanov), control, zero.clone(), &zero)];
    for method in Method::ALL {
        for rule in [BetaRule::FletcherReeves, BetaRule::PolakRibierePlus] {
            logs.push(pncg_run_with(
                sys,
                &precond(method),
                rule,
                StepRule::LineSearch(LineSearchConfig::default()),
                control,
                zero.clone(),
                &zero,
            ));
        }
    }
    let mut worst = f64::INFINITY;
    let mut steps = 0;
    for log in logs {
        let Ok(log) = log else {
            return entry("energy_decay", f64::NEG_INFINITY, steps, "a run failed".into());
        };
        for w in log.records.windows(2) {
            worst = worst.min(w[0].energy + opts.decay_slack - w[1].energy);
            steps += 1;
        }
    }
    entry(
        "energy_decay",
        worst,
        steps,
        format!("absolute slack H(u^n) + {:.0e} - H(u^(n+1))", opts.decay_slack),
    )
}

pub fn check_mesh(sys: &FemSystem) -> CheckEntry {
    let mesh = sys.mesh();
    let area_gap = (mesh.total_area() - LSHAPE_AREA).abs();
    let detail = match mesh.validate() {
        Ok(()) => format!("orientation, conformity, boundary; area error {area_gap:.1e}"),
        Err(e) => e,
    };
    let mut e = entry("mesh_invariants", 1e-12 - area_gap, mesh.num_triangles(), detail);
    if mesh.validate().is_err() {
        e.status = CheckStatus::Fail;
    }
    e
}

fn difference(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// The whole battery on the configured mesh and coefficient.
pub fn run_checks(cfg: &ExperimentConfig, opts: &CheckOptions) -> Result<CheckReport, ExperimentError> {
    let sys = FemSystem::new(build_lshape(cfg.mesh_level)?, cfg.model())?;
    let mut entries = vec![check_mesh(&sys), check_mu_sandwich(&sys, opts)];
    if sys.num_dofs() == 0 {
        for name in [
            "strong_monotonicity",
            "lipschitz",
            "gradient_fd",
            "spectral_sandwich",
            "energy_decay",
        ] {
            entries.push(skipped(name));
        }
    } else {
        entries.push(check_strong_monotonicity(&sys, opts));
        entries.push(check_lipschitz(&sys, opts));
        entries.push(check_gradient(&sys, opts));
        entries.push(check_spectral_sandwich(&sys, opts));
        entries.push(check_energy_decay(&sys, cfg, opts));
    }
    Ok(CheckReport { entries })
}
