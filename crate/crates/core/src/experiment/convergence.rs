use std::fmt::Write as _;

use crate::fem::FemSystem;
use crate::mesh::build_lshape;

use super::config::ExperimentConfig;
use super::reference::compute_reference;
use super::ExperimentError;

/// Quadrature degree for the exact-solution error.
const ERROR_DEGREE: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub level: u32,
    pub num_dofs: usize,
    /// `||u_ref - I_h u*||_X`.
    pub interpolation_gap: f64,
    /// `||grad(u* - u_ref)||_{L^2}`.
    pub exact_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
}

impl ProbeReport {
    fn ratios_of(&self, f: impl Fn(&ProbeRow) -> f64) -> Vec<f64> {
        self.rows.windows(2).map(|w| f(&w[0]) / f(&w[1])).collect()
    }

    /// Successive ratios of the exact-solution error.
    pub fn ratios(&self) -> Vec<f64> {
        self.ratios_of(|r| r.exact_error)
    }

    pub fn interpolation_ratios(&self) -> Vec<f64> {
        self.ratios_of(|r| r.interpolation_gap)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("level   dofs     |u*-u_h|_X  ratio   |I_h u*-u_h|_X  ratio\n");
        let exact = self.ratios();
        let interp = self.interpolation_ratios();
        for (i, r) in self.rows.iter().enumerate() {
            let fmt = |v: &[f64]| i.checked_sub(1).map_or_else(|| "-".to_owned(), |j| format!("{:.3}", v[j]));
            writeln!(
                out,
                "{:>5}  {:>7}  {:>12.4e}  {:>5}  {:>14.4e}  {:>5}",
                r.level,
                r.num_dofs,
                r.exact_error,
                fmt(&exact),
                r.interpolation_gap,
                fmt(&interp)
            )
            .unwrap();
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,dofs,exact_error,interpolation_gap\n");
        for r in &self.rows {
            writeln!(out, "{},{},{:e},{:e}", r.level, r.num_dofs, r.exact_error, r.interpolation_gap).unwrap();
        }
        out
    }
}

/// Discretisation errors of the reference solution on each level.
pub fn fem_convergence_probe(cfg: &ExperimentConfig, levels: &[u32]) -> Result<ProbeReport, ExperimentError> {
    let mut rows = Vec::new();
    for &level in levels {
        let cfg = cfg.clone().with_level(level);
        cfg.validate()?;
        let sys = FemSystem::new(build_lshape(level)?, cfg.model())?;
        let u = compute_reference(&cfg, &sys)?.u;
        let interp = sys.interpolate(|p| sys.solution().value(p));
        rows.push(ProbeRow {
            level,
            num_dofs: sys.num_dofs(),
            interpolation_gap: sys.x_norm(&u.difference(&interp)),
            exact_error: sys.error_to_exact(&u, ERROR_DEGREE),
        });
    }
    Ok(ProbeReport { rows })
}
