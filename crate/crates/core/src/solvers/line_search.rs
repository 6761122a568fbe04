use serde::{Deserialize, Serialize};

use crate::fem::{FemSystem, LineEnergy};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Bracketing plus golden-section search for `min_{alpha >= 0} H(u + alpha d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LineSearchConfig {
    /// Cap on the bracket.
    pub alpha_max: f64,
    /// Growth factor of the trial step while bracketing.
    pub expansion: f64,
    /// Absolute width at which golden-section search stops.
    pub tol_alpha: f64,
    /// Energy evaluation budget.
    pub max_evals: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        Self {
            alpha_max: 4.0,
            expansion: 2.0,
            tol_alpha: 1e-8,
            max_evals: 200,
        }
    }
}

impl LineSearchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.alpha_max > 0.0 && self.expansion > 1.0 && self.tol_alpha > 0.0 && self.max_evals > 0) {
            return Err(format!("invalid line search settings: {self:?}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub alpha: f64,
    /// `H(u + alpha d) - H(u)`, never positive.
    pub energy_change: f64,
    pub evaluations: usize,
    /// The evaluation budget ran out; `alpha` is the best point seen.
    pub budget_exhausted: bool,
}

struct Tracker<'a> {
    phi: &'a dyn Fn(f64) -> f64,
    evaluations: usize,
    max_evals: usize,
    best: (f64, f64),
}

impl Tracker<'_> {
    fn eval(&mut self, alpha: f64) -> f64 {
        self.evaluations += 1;
        let value = (self.phi)(alpha);
        let (best_alpha, best_value) = self.best;
        // ties go to the smaller step
        if value < best_value || (value == best_value && alpha < best_alpha) {
            self.best = (alpha, value);
        }
        value
    }

    fn exhausted(&self) -> bool {
        self.evaluations >= self.max_evals
    }
}

/// Minimises `alpha -> H(u + alpha d) - H(u)` over `[0, alpha_max]`.
pub fn line_search(sys: &FemSystem, u: &[f64], d: &[f64], cfg: &LineSearchConfig) -> LineSearchOutcome {
    if d.iter().all(|&x| x == 0.0) {
        return LineSearchOutcome {
            alpha: 0.0,
            energy_change: 0.0,
            evaluations: 0,
            budget_exhausted: false,
        };
    }
    let line = sys.line_energy(u, d);
    let mut out = minimise_on_ray(&|a| line.delta(a), cfg);
    polish(&line, &mut out, cfg);
    out
}

/// Secant steps on the exact slope, starting from the golden-section result.
fn polish(line: &LineEnergy<'_>, out: &mut LineSearchOutcome, cfg: &LineSearchConfig) {
    if out.alpha <= 0.0 || out.alpha >= cfg.alpha_max {
        return;
    }
    let width = cfg.tol_alpha.max(1e-6 * out.alpha);
    let (mut x0, mut x1) = (out.alpha - width, out.alpha);
    let (mut s0, mut s1) = (line.slope(x0), line.slope(x1));
    let (mut best, mut best_slope) = (x1, s1.abs());
    out.evaluations += 2;
    for _ in 0..4 {
        if s1 == s0 || best_slope == 0.0 {
            break;
        }
        let x2 = x1 - s1 * (x1 - x0) / (s1 - s0);
        if !(x2 > 0.0 && x2 < cfg.alpha_max) {
            break;
        }
        let s2 = line.slope(x2);
        out.evaluations += 1;
        if s2.abs() < best_slope {
            best = x2;
            best_slope = s2.abs();
        }
        (x0, s0, x1, s1) = (x1, s1, x2, s2);
    }
    if best != out.alpha {
        let change = line.delta(best);
        out.evaluations += 1;
        if change <= out.energy_change + 1e-14 * change.abs().max(1.0) {
            out.alpha = best;
            out.energy_change = change;
        }
    }
}

/// Bracketing and golden-section search for a function with `phi(0) = 0`.
pub(crate) fn minimise_on_ray(phi: &dyn Fn(f64) -> f64, cfg: &LineSearchConfig) -> LineSearchOutcome {
    let mut t = Tracker {
        phi,
        evaluations: 0,
        max_evals: cfg.max_evals,
        best: (0.0, 0.0),
    };

    // bracketing: (lo, mid, hi) with phi(mid) the smallest value seen
    let mut lo = 0.0;
    let mut mid = 1.0f64.min(cfg.alpha_max);
    let mut f_mid = t.eval(mid);
    let (mut a, mut b) = if f_mid >= 0.0 {
        (0.0, mid)
    } else {
        loop {
            if mid >= cfg.alpha_max || t.exhausted() {
                break (lo, mid);
            }
            let hi = (mid * cfg.expansion).min(cfg.alpha_max);
            let f_hi = t.eval(hi);
            if f_hi >= f_mid {
                break (lo, hi);
            }
            lo = mid;
            mid = hi;
            f_mid = f_hi;
        }
    };

    // golden section on [a, b]
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = t.eval(x1);
    let mut f2 = t.eval(x2);
    while b - a > cfg.tol_alpha && !t.exhausted() {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = t.eval(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = t.eval(x2);
        }
    }
    let budget_exhausted = b - a > cfg.tol_alpha;
    let (alpha, energy_change) = t.best;
    LineSearchOutcome {
        alpha,
        energy_change,
        evaluations: t.evaluations,
        budget_exhausted,
    }
}
