use std::path::{Path, PathBuf};

use crate::fem::{CoefficientVector, FemSystem};
use crate::linalg::norm2;
use crate::solvers::{fixed_point_step, iterate_fixed_point, Method, OperatorPreconditioner, SolverError};

use super::config::{ExperimentConfig, ReferenceMethod, ReferenceSpec};
use super::ExperimentError;

/// Overrides the cache directory.
pub const CACHE_ENV: &str = "DESCENT_PDE_CACHE";

const MAGIC: [u8; 8] = *b"DPDEREF\0";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 8;

/// `$DESCENT_PDE_CACHE`, or `cache/` below the output directory.
pub fn cache_dir(cfg: &ExperimentConfig) -> PathBuf {
    match std::env::var_os(CACHE_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.output_dir.join("cache"),
    }
}

/// Cache key: mesh level, coefficient parameters and reference mode.
pub fn cache_key(cfg: &ExperimentConfig) -> String {
    let model = serde_json::to_string(&cfg.model()).expect("model serialises");
    format!("level={};model={model};mode={}", cfg.mesh_level, cfg.reference.tag())
}

pub fn cache_path(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    // FNV-1a keeps file names short and stable across runs
    let hash = cache_key(cfg)
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    dir.join(format!("ref_L{}_{}_{hash:016x}.bin", cfg.mesh_level, cfg.reference.tag()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub u: CoefficientVector,
    pub from_cache: bool,
    pub path: Option<PathBuf>,
}

/// Runs the configured reference solver from `u^0 = 0`.
pub fn solve_reference(sys: &FemSystem, spec: &ReferenceSpec) -> Result<CoefficientVector, ExperimentError> {
    let u0 = sys.zero_vector();
    let u = match spec.method {
        ReferenceMethod::KacanovFixedSteps => {
            iterate_fixed_point(sys, &OperatorPreconditioner::new(Method::Kacanov), u0, spec.kacanov_steps)?
        }
        ReferenceMethod::NewtonToResidual => newton_to_floor(sys, spec)?,
    };
    Ok(u)
}

/// Scaled residual below which stagnation counts as having reached the rounding floor.
const FLOOR_THRESHOLD: f64 = 1e-10;

/// Undamped Newton until `||F_h(u)|| / ||b_h|| <= tol`, or until the residual
/// stops halving once it is below [`FLOOR_THRESHOLD`].
fn newton_to_floor(sys: &FemSystem, spec: &ReferenceSpec) -> Result<CoefficientVector, ExperimentError> {
    let precond = OperatorPreconditioner::new(Method::Newton);
    let scale = norm2(sys.load());
    let scaled = |u: &[f64]| {
        let r = norm2(&sys.residual(u));
        if scale > 0.0 { r / scale } else { r }
    };
    let mut u = sys.zero_vector();
    let mut res = scaled(&u);
    for n in 0..spec.newton_max_steps {
        if res <= spec.newton_residual_tol {
            return Ok(u);
        }
        let next = fixed_point_step(&precond, sys, &u).map_err(SolverError::at_step(n))?;
        let next_res = scaled(&next);
        if res <= FLOOR_THRESHOLD && next_res > 0.5 * res {
            return Ok(if next_res < res { next } else { u });
        }
        u = next;
        res = next_res;
    }
    if res <= spec.newton_residual_tol {
        return Ok(u);
    }
    Err(SolverError::NotConverged {
        steps: spec.newton_max_steps,
        residual: res,
        target: spec.newton_residual_tol,
    }
    .into())
}

/// Loads the reference from `dir` or computes and stores it there.
/// Unreadable or inconsistent cache files are recomputed and overwritten.
pub fn compute_reference_in(
    cfg: &ExperimentConfig,
    sys: &FemSystem,
    dir: Option<&Path>,
) -> Result<ReferenceSolution, ExperimentError> {
    let path = dir.map(|d| cache_path(d, cfg));
    if let Some(p) = &path {
        if let Some(u) = read_cache(p, sys.num_dofs()) {
            return Ok(ReferenceSolution {
                u,
                from_cache: true,
                path,
            });
        }
    }
    let u = solve_reference(sys, &cfg.reference)?;
    if let Some(p) = &path {
        write_cache(p, &u)?;
    }
    Ok(ReferenceSolution {
        u,
        from_cache: false,
        path,
    })
}

/// [`compute_reference_in`] with the directory from [`cache_dir`].
pub fn compute_reference(cfg: &ExperimentConfig, sys: &FemSystem) -> Result<ReferenceSolution, ExperimentError> {
    compute_reference_in(cfg, sys, Some(&cache_dir(cfg)))
}

pub fn encode(u: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * u.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(u.len() as u64).to_le_bytes());
    for x in u {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Inverse of [`encode`]; `None` unless the header and length match `m_h`.
pub fn decode(bytes: &[u8], m_h: usize) -> Option<CoefficientVector> {
    if bytes.len() != HEADER_LEN + 8 * m_h || bytes[..8] != MAGIC {
        return None;
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().ok()?);
    let len = u64::from_le_bytes(bytes[12..20].try_into().ok()?);
    if version != VERSION || len != m_h as u64 {
        return None;
    }
    let u: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    u.iter().all(|x| x.is_finite()).then(|| u.into())
}

fn read_cache(path: &Path, m_h: usize) -> Option<CoefficientVector> {
    decode(&std::fs::read(path).ok()?, m_h)
}

fn write_cache(path: &Path, u: &[f64]) -> Result<(), ExperimentError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(u)).map_err(|e| ExperimentError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| ExperimentError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionModel;

    fn small(label: &str, level: u32) -> (ExperimentConfig, FemSystem) {
        let cfg = ExperimentConfig::preset_case(label).unwrap().with_level(level);
        let sys = FemSystem::new(crate::mesh::build_lshape(level).unwrap(), cfg.model()).unwrap();
        (cfg, sys)
    }

    #[test]
    fn encode_decode_round_trip() {
        let u = vec![1.5, -0.0, f64::MIN_POSITIVE, 3e300];
        let bytes = encode(&u);
        assert_eq!(bytes.len(), 20 + 32);
        assert_eq!(&*decode(&bytes, 4).unwrap(), &u[..]);
        assert!(decode(&bytes, 3).is_none());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad, 4).is_none());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(decode(&bad, 4).is_none());
        assert!(decode(&bytes[..bytes.len() - 1], 4).is_none());
        assert!(decode(&encode(&[f64::NAN]), 1).is_none());
    }

    #[test]
    fn cache_is_reused_bitwise_and_corruption_recomputes() {
        let dir = tempfile::tempdir().unwrap();
        let (mut cfg, sys) = small("a", 3);
        cfg.reference.kacanov_steps = 50;
        let fresh = compute_reference_in(&cfg, &sys, Some(dir.path())).unwrap();
        assert!(!fresh.from_cache);
        let cached = compute_reference_in(&cfg, &sys, Some(dir.path())).unwrap();
        assert!(cached.from_cache);
        let bits = |u: &[f64]| u.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&fresh.u), bits(&cached.u));

        let path = fresh.path.unwrap();
        std::fs::write(&path, b"garbage").unwrap();
        let again = compute_reference_in(&cfg, &sys, Some(dir.path())).unwrap();
        assert!(!again.from_cache);
        assert_eq!(bits(&again.u), bits(&fresh.u));
        assert!(compute_reference_in(&cfg, &sys, Some(dir.path())).unwrap().from_cache);
    }

    #[test]
    fn keys_separate_level_parameters_and_mode() {
        let (a, _) = small("a", 3);
        let (b, _) = small("b", 3);
        let dir = Path::new("/c");
        let mut newton = a.clone();
        newton.reference.method = ReferenceMethod::NewtonToResidual;
        let paths = [
            cache_path(dir, &a),
            cache_path(dir, &b),
            cache_path(dir, &a.clone().with_level(4)),
            cache_path(dir, &newton),
        ];
        for i in 0..paths.len() {
            for j in 0..i {
                assert_ne!(paths[i], paths[j]);
            }
        }
    }

    #[test]
    fn constant_coefficient_reference_is_the_linear_solve() {
        let c = 3.0;
        for method in [ReferenceMethod::KacanovFixedSteps, ReferenceMethod::NewtonToResidual] {
            let mut cfg = ExperimentConfig::preset_case("a").unwrap().with_level(3);
            cfg.diffusion = Some(DiffusionModel::constant(c).unwrap());
            cfg.reference.method = method;
            cfg.reference.kacanov_steps = 3;
            let sys = FemSystem::new(crate::mesh::build_lshape(3).unwrap(), cfg.model()).unwrap();
            let u = compute_reference_in(&cfg, &sys, None).unwrap().u;
            let exact = crate::linalg::spd_solve(&sys.riesz().scaled(c), sys.load()).unwrap();
            assert!(sys.x_norm(&u.difference(&exact)) <= 1e-10);
        }
    }

    #[test]
    fn reference_modes_agree_on_case_a() {
        let (cfg, sys) = small("a", 5);
        let kacanov = solve_reference(&sys, &cfg.reference).unwrap();
        let spec = ReferenceSpec {
            method: ReferenceMethod::NewtonToResidual,
            ..cfg.reference
        };
        let newton = solve_reference(&sys, &spec).unwrap();
        let gap = sys.x_norm(&kacanov.difference(&newton));
        assert!(gap <= 5e-12, "{gap:e}");
        let scaled = norm2(&sys.residual(&kacanov)) / norm2(sys.load());
        assert!(scaled <= 1e-8, "{scaled:e}");
    }
}
