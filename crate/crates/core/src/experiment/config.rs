use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diffusion::{CarreauParams, DiffusionModel};
use crate::mesh::MAX_LEVEL;
use crate::solvers::{BetaRule, Method, Mode, SolverConfig};

use super::ExperimentError;

/// Level used by `--paper-scale` runs.
pub const FINE_SCALE_LEVEL: u32 = 7;

/// How the discrete reference solution is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReferenceMethod {
    /// A fixed number of Kacanov steps from zero.
    KacanovFixedSteps,
    /// Undamped Newton steps until the residual is small.
    NewtonToResidual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceSpec {
    pub method: ReferenceMethod,
    pub kacanov_steps: usize,
    /// Bound on `||F_h(u)|| / ||b_h||`; reaching the rounding floor also stops.
    pub newton_residual_tol: f64,
    pub newton_max_steps: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            method: ReferenceMethod::KacanovFixedSteps,
            kacanov_steps: 1000,
            newton_residual_tol: 1e-13,
            newton_max_steps: 100,
        }
    }
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.kacanov_steps == 0 || self.newton_max_steps == 0 {
            return Err("reference step counts must be positive".into());
        }
        if !(self.newton_residual_tol > 0.0) {
            return Err("newton_residual_tol must be positive".into());
        }
        Ok(())
    }

    /// Short tag used in cache keys.
    pub fn tag(&self) -> String {
        match self.method {
            ReferenceMethod::KacanovFixedSteps => format!("kacanov{}", self.kacanov_steps),
            ReferenceMethod::NewtonToResidual => format!("newton{:e}", self.newton_residual_tol),
        }
    }
}

fn default_level() -> u32 {
    6
}

fn default_label() -> String {
    "a".into()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_carreau() -> CarreauParams {
    CarreauParams {
        mu_inf: 1.0,
        mu_0: 100.0,
        lambda: 2.0,
        r: 1.4,
    }
}

/// One experiment: mesh, coefficient, the solver matrix and where results go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_level")]
    pub mesh_level: u32,
    #[serde(default = "default_carreau")]
    pub carreau: CarreauParams,
    /// Replaces the Carreau law, e.g. by a constant coefficient.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<DiffusionModel>,
    #[serde(default = "default_label")]
    pub case_label: String,
    pub solvers: Vec<SolverConfig>,
    #[serde(default)]
    pub reference: ReferenceSpec,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

/// FP, PNCG-FR and PNCG-PR+ for every method.
pub fn table_matrix(delta_z: f64) -> Vec<SolverConfig> {
    let mut out = Vec::new();
    for method in Method::ALL {
        out.push(SolverConfig::new(method, Mode::FixedPoint).with_delta_z(delta_z));
        for rule in [BetaRule::FletcherReeves, BetaRule::PolakRibierePlus] {
            out.push(SolverConfig::pncg(method, rule).with_delta_z(delta_z));
        }
    }
    out
}

impl ExperimentConfig {
    /// Case (a) `r = 1.4, delta_Z = 0.03` or case (b) `r = 1.05, delta_Z = 0.02`.
    pub fn preset_case(label: &str) -> Option<Self> {
        let (r, delta_z) = match label {
            "a" => (1.4, 0.03),
            "b" => (1.05, 0.02),
            _ => return None,
        };
        Some(Self {
            mesh_level: default_level(),
            carreau: CarreauParams {
                r,
                ..default_carreau()
            },
            diffusion: None,
            case_label: label.into(),
            solvers: table_matrix(delta_z),
            reference: ReferenceSpec::default(),
            output_dir: default_output(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn model(&self) -> DiffusionModel {
        self.diffusion.unwrap_or(DiffusionModel::Carreau(self.carreau))
    }

    pub fn with_level(self, mesh_level: u32) -> Self {
        Self { mesh_level, ..self }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.mesh_level > MAX_LEVEL {
            return bad(format!("mesh_level {} exceeds {MAX_LEVEL}", self.mesh_level));
        }
        if self.solvers.is_empty() {
            return bad("at least one solver config is required".into());
        }
        if let Err(e) = self.model().validate() {
            return bad(e.to_string());
        }
        for s in &self.solvers {
            if let Err(e) = s.validate() {
                return bad(format!("{}: {e}", s.label()));
            }
        }
        if let Err(e) = self.reference.validate() {
            return bad(e);
        }
        Ok(())
    }
}
