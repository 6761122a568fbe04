use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::fem::FemSystem;
use crate::solvers::{run, IterationLog, Mode, SolverConfig};

use super::config::ExperimentConfig;
use super::ExperimentError;

/// One table cell: a solver configuration and its run, or the error that stopped it.
#[derive(Debug, Clone)]
pub struct TableCell {
    pub config: SolverConfig,
    pub outcome: Result<IterationLog, String>,
}

impl TableCell {
    /// Step count, `-` without convergence, `err` on failure.
    pub fn label(&self) -> String {
        match &self.outcome {
            Ok(log) => log.steps_label(),
            Err(_) => "err".into(),
        }
    }

    pub fn steps(&self) -> Option<usize> {
        self.outcome.as_ref().ok().and_then(|log| log.steps_to_tol)
    }

    pub fn column(&self) -> String {
        match self.config.mode {
            Mode::FixedPoint => "FP".into(),
            Mode::Pncg => format!("PNCG {}", self.config.beta_rule.label()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TableResult {
    pub case_label: String,
    pub mesh_level: u32,
    pub num_dofs: usize,
    pub cells: Vec<TableCell>,
}

/// Runs every configured solver against `u_ref`, in parallel.
pub fn run_table(cfg: &ExperimentConfig, sys: &FemSystem, u_ref: &[f64]) -> TableResult {
    let cells = cfg
        .solvers
        .par_iter()
        .map(|s| TableCell {
            config: *s,
            outcome: run(sys, s, u_ref).map_err(|e| e.to_string()),
        })
        .collect();
    TableResult {
        case_label: cfg.case_label.clone(),
        mesh_level: cfg.mesh_level,
        num_dofs: sys.num_dofs(),
        cells,
    }
}

fn unique<T: PartialEq + Clone>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

impl TableResult {
    pub fn cell(&self, config: &SolverConfig) -> Option<&TableCell> {
        self.cells.iter().find(|c| c.config == *config)
    }

    /// Rows are methods, columns FP and the PNCG variants, in config order.
    pub fn to_text(&self) -> String {
        let rows = unique(self.cells.iter().map(|c| c.config.method));
        let cols = unique(self.cells.iter().map(TableCell::column));
        let first = rows.iter().map(|m| m.label().len()).max().unwrap_or(0).max(6);
        let width = cols.iter().map(String::len).max().unwrap_or(0).max(4);
        let mut out = format!(
            "case ({}), level {}, {} dofs\n",
            self.case_label, self.mesh_level, self.num_dofs
        );
        write!(out, "{:<first$}", "method").unwrap();
        for c in &cols {
            write!(out, "  {c:>width$}").unwrap();
        }
        out.push('\n');
        for m in &rows {
            write!(out, "{:<first$}", m.label()).unwrap();
            for c in &cols {
                let label = self
                    .cells
                    .iter()
                    .find(|cell| cell.config.method == *m && cell.column() == *c)
                    .map_or_else(String::new, TableCell::label);
                write!(out, "  {label:>width$}").unwrap();
            }
            out.push('\n');
        }
        for cell in &self.cells {
            if let Err(e) = &cell.outcome {
                writeln!(out, "err {}: {e}", cell.config.label()).unwrap();
            }
        }
        out
    }

    /// `case,method,mode,beta_rule,steps,converged`; `steps` is the count to
    /// tolerance or the number of steps taken, empty after an error.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("case,method,mode,beta_rule,steps,converged\n");
        for cell in &self.cells {
            let s = &cell.config;
            let (mode, beta) = match s.mode {
                Mode::FixedPoint => ("FP", ""),
                Mode::Pncg => ("PNCG", s.beta_rule.label()),
            };
            let (steps, converged) = match &cell.outcome {
                Ok(log) => (
                    log.steps_to_tol
                        .unwrap_or(log.records.len().saturating_sub(1))
                        .to_string(),
                    log.converged.to_string(),
                ),
                Err(_) => (String::new(), "err".into()),
            };
            writeln!(out, "{},{},{mode},{beta},{steps},{converged}", self.case_label, s.method.label()).unwrap();
        }
        out
    }

    /// File stem of a cell's history, e.g. `a_kacanov_pncg_pr`.
    pub fn history_stem(&self, config: &SolverConfig) -> String {
        let mode = match config.mode {
            Mode::FixedPoint => "fp".to_owned(),
            Mode::Pncg => format!(
                "pncg_{}",
                config.beta_rule.label().to_lowercase().replace('+', "plus")
            ),
        };
        format!("{}_{}_{mode}", self.case_label, config.method.label().to_lowercase())
    }

    /// Writes `table_<case>.txt`, `summary_<case>.csv` and `history/<stem>.csv`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
        let history = dir.join("history");
        std::fs::create_dir_all(&history).map_err(|e| ExperimentError::io(&history, e))?;
        let mut files = vec![
            (dir.join(format!("table_{}.txt", self.case_label)), self.to_text()),
            (dir.join(format!("summary_{}.csv", self.case_label)), self.summary_csv()),
        ];
        for cell in &self.cells {
            if let Ok(log) = &cell.outcome {
                let path = history.join(format!("{}.csv", self.history_stem(&cell.config)));
                files.push((path, log.history_csv()));
            }
        }
        for (path, text) in &files {
            std::fs::write(path, text).map_err(|e| ExperimentError::io(path, e))?;
        }
        Ok(files.into_iter().map(|(p, _)| p).collect())
    }
}
