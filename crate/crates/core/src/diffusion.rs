//! Nonlinear diffusion coefficients `mu`, their derivatives and potentials.
//!
//! The potential is `psi(s) = 1/2 * int_0^s mu(t) dt`, so that
//! `d/ds psi(|g|^2) = mu(|g|^2) * g` along gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper end of the sampling interval used by [`DiffusionModel::check_monotonicity`].
pub const MONOTONICITY_SAMPLE_MAX: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiffusionError {
    #[error("invalid Carreau parameters: {0}")]
    InvalidCarreau(String),
    #[error("invalid diffusion model: {0}")]
    Invalid(String),
}

/// Parameters of the Carreau law
/// `mu(t) = mu_inf + (mu_0 - mu_inf) * (1 + lambda t)^((r - 2) / 2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarreauParams {
    pub mu_inf: f64,
    pub mu_0: f64,
    pub lambda: f64,
    pub r: f64,
}

impl CarreauParams {
    pub fn validate(&self) -> Result<(), DiffusionError> {
        let bad = |msg: &str| Err(DiffusionError::InvalidCarreau(msg.to_owned()));
        if !(self.mu_inf.is_finite() && self.mu_inf > 0.0) {
            return bad("mu_inf must be positive");
        }
        if !(self.mu_0.is_finite() && self.mu_0 > self.mu_inf) {
            return bad("mu_0 must exceed mu_inf");
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda must be positive");
        }
        if !(self.r > 1.0 && self.r < 2.0) {
            return bad("r must lie in (1, 2)");
        }
        Ok(())
    }

    fn exponent(&self) -> f64 {
        0.5 * (self.r - 2.0)
    }
}

/// Diffusion coefficient together with its monotonicity constants `m_mu <= M_mu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiffusionModel {
    Carreau(CarreauParams),
    /// `mu == value`; turns the problem linear.
    Constant { value: f64 },
    /// `mu(t) = intercept + slope * t` with caller-claimed bounds. Only used to
    /// exercise the property checks with a coefficient that may violate them.
    Affine {
        intercept: f64,
        slope: f64,
        m_mu: f64,
        #[serde(rename = "M_mu")]
        upper: f64,
    },
}

impl DiffusionModel {
    pub fn carreau(params: CarreauParams) -> Result<Self, DiffusionError> {
        params.validate()?;
        Ok(Self::Carreau(params))
    }

    pub fn constant(value: f64) -> Result<Self, DiffusionError> {
        if !(value.is_finite() && value > 0.0) {
            return Err(DiffusionError::Invalid(format!(
                "constant coefficient must be positive, got {value}"
            )));
        }
        Ok(Self::Constant { value })
    }

    pub fn validate(&self) -> Result<(), DiffusionError> {
        match *self {
            Self::Carreau(p) => p.validate(),
            Self::Constant { value } => Self::constant(value).map(|_| ()),
            Self::Affine {
                intercept,
                m_mu,
                upper,
                ..
            } => {
                if intercept > 0.0 && m_mu > 0.0 && upper >= m_mu {
                    Ok(())
                } else {
                    Err(DiffusionError::Invalid(
                        "affine model needs positive intercept and 0 < m_mu <= M_mu".into(),
                    ))
                }
            }
        }
    }

    pub fn mu(&self, t: f64) -> f64 {
        match *self {
            Self::Carreau(p) => p.mu_inf + (p.mu_0 - p.mu_inf) * (1.0 + p.lambda * t).powf(p.exponent()),
            Self::Constant { value } => value,
            Self::Affine {
                intercept, slope, ..
            } => intercept + slope * t,
        }
    }

    pub fn mu_prime(&self, t: f64) -> f64 {
        match *self {
            Self::Carreau(p) => {
                let e = p.exponent();
                (p.mu_0 - p.mu_inf) * p.lambda * e * (1.0 + p.lambda * t).powf(e - 1.0)
            }
            Self::Constant { .. } => 0.0,
            Self::Affine { slope, .. } => slope,
        }
    }

    /// `psi(s) = 1/2 int_0^s mu`, in closed form.
    pub fn psi(&self, s: f64) -> f64 {
        self.psi_increment(0.0, s)
    }

    /// `psi(s1) - psi(s0)` without cancellation when `s1` is close to `s0`.
    pub fn psi_increment(&self, s0: f64, s1: f64) -> f64 {
        let ds = s1 - s0;
        match *self {
            Self::Carreau(p) => {
                // (1 + l s1)^q - (1 + l s0)^q = (1 + l s0)^q * expm1(q * ln1p(l ds / (1 + l s0)))
                let q = 0.5 * p.r;
                let base = 1.0 + p.lambda * s0;
                let power_diff = base.powf(q) * (q * (p.lambda * ds / base).ln_1p()).exp_m1();
                0.5 * (p.mu_inf * ds + (p.mu_0 - p.mu_inf) * 2.0 / (p.lambda * p.r) * power_diff)
            }
            Self::Constant { value } => 0.5 * value * ds,
            Self::Affine {
                intercept, slope, ..
            } => 0.5 * (intercept * ds + 0.5 * slope * ds * (s1 + s0)),
        }
    }

    /// Lower monotonicity constant `m_mu`.
    pub fn lower_bound(&self) -> f64 {
        match *self {
            Self::Carreau(p) => p.mu_inf,
            Self::Constant { value } => value,
            Self::Affine { m_mu, .. } => m_mu,
        }
    }

    /// Upper monotonicity constant `M_mu`.
    pub fn upper_bound(&self) -> f64 {
        match *self {
            Self::Carreau(p) => p.mu_0,
            Self::Constant { value } => value,
            Self::Affine { upper, .. } => upper,
        }
    }

    /// Samples `m_mu (t - s) <= mu(t^2) t - mu(s^2) s <= M_mu (t - s)` for `t > s >= 0`
    /// on a uniform grid of `samples` points plus `samples` seeded random pairs.
    pub fn check_monotonicity(&self, samples: usize) -> MonotonicityReport {
        assert!(samples >= 2, "need at least two samples");
        let (m, big_m) = (self.lower_bound(), self.upper_bound());
        let flux = |t: f64| self.mu(t * t) * t;
        let mut report = MonotonicityReport {
            passed: true,
            m_mu: m,
            upper: big_m,
            worst_lower_margin: f64::INFINITY,
            worst_upper_margin: f64::INFINITY,
            pairs_checked: 0,
        };
        let mut check = |s: f64, t: f64| {
            if t <= s {
                return;
            }
            let slope = (flux(t) - flux(s)) / (t - s);
            // relative slack for the rounding in the divided difference
            let slack = 1e-9 * big_m.max(slope.abs());
            let lower = (slope - m) / m;
            let upper = (big_m - slope) / big_m;
            report.worst_lower_margin = report.worst_lower_margin.min(lower);
            report.worst_upper_margin = report.worst_upper_margin.min(upper);
            if slope < m - slack || slope > big_m + slack {
                report.passed = false;
            }
            report.pairs_checked += 1;
        };

        let grid: Vec<f64> = (0..samples)
            .map(|i| MONOTONICITY_SAMPLE_MAX * i as f64 / (samples - 1) as f64)
            .collect();
        for w in grid.windows(2) {
            check(w[0], w[1]);
        }
        for &t in &grid {
            check(0.0, t);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0x6d75);
        for _ in 0..samples {
            // mix uniform and log-uniform magnitudes to resolve both small and large arguments
            let a = if rng.random_bool(0.5) {
                rng.random_range(0.0..MONOTONICITY_SAMPLE_MAX)
            } else {
                10f64.powf(rng.random_range(-6.0..4.0))
            };
            let b = if rng.random_bool(0.5) {
                rng.random_range(0.0..MONOTONICITY_SAMPLE_MAX)
            } else {
                10f64.powf(rng.random_range(-6.0..4.0))
            };
            check(a.min(b), a.max(b));
        }
        report
    }
}

/// Outcome of [`DiffusionModel::check_monotonicity`].
///
/// Margins are relative: `(slope - m_mu) / m_mu` and `(M_mu - slope) / M_mu`,
/// minimised over all sampled pairs; negative values mark violations.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub passed: bool,
    pub m_mu: f64,
    pub upper: f64,
    pub worst_lower_margin: f64,
    pub worst_upper_margin: f64,
    pub pairs_checked: usize,
}
