use std::path::PathBuf;

use descent_pde::experiment::{
    compute_reference_in, fem_convergence_probe, run_checks, run_table, CheckOptions, CheckStatus,
    ExperimentConfig,
};
use descent_pde::{build_lshape, DiffusionModel, FemSystem, Method};

fn cache_dir() -> PathBuf {
    std::env::var_os("DESCENT_PDE_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("descent-pde-cache"))
}

fn shipped(label: &str) -> ExperimentConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join(format!("../../configs/case_{label}.json"));
    ExperimentConfig::load(&path).unwrap()
}

#[test]
fn shipped_configs_are_the_preset_cases() {
    for label in ["a", "b"] {
        let mut cfg = shipped(label);
        cfg.output_dir = ExperimentConfig::preset_case(label).unwrap().output_dir;
        assert_eq!(cfg, ExperimentConfig::preset_case(label).unwrap());
    }
}

#[test]
fn newton_errors_decrease_strictly_on_shipped_configs() {
    for label in ["a", "b"] {
        let mut cfg = shipped(label);
        cfg.solvers.retain(|s| s.method == Method::Newton);
        let sys = FemSystem::new(build_lshape(cfg.mesh_level).unwrap(), cfg.model()).unwrap();
        let u_ref = compute_reference_in(&cfg, &sys, Some(&cache_dir())).unwrap().u;
        let table = run_table(&cfg, &sys, &u_ref);
        assert_eq!(table.cells.len(), 3);
        for cell in &table.cells {
            let log = cell.outcome.as_ref().unwrap();
            assert!(log.converged, "{}", cell.config.label());
            for w in log.records.windows(2) {
                assert!(w[1].error_x < w[0].error_x, "({label}) {} step {}", cell.config.label(), w[1].step);
            }
        }
    }
}

#[test]
fn table_runs_are_deterministic() {
    let cfg = ExperimentConfig::preset_case("b").unwrap().with_level(4);
    let sys = FemSystem::new(build_lshape(4).unwrap(), cfg.model()).unwrap();
    let u_ref = compute_reference_in(&cfg, &sys, None).unwrap().u;
    let first = run_table(&cfg, &sys, &u_ref);
    let second = run_table(&cfg, &sys, &u_ref);
    assert_eq!(first.summary_csv(), second.summary_csv());
    for (a, b) in first.cells.iter().zip(&second.cells) {
        assert_eq!(a.outcome.as_ref().unwrap(), b.outcome.as_ref().unwrap());
    }
}

#[test]
fn convergence_probe_for_constant_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::preset_case("a").unwrap();
    cfg.diffusion = Some(DiffusionModel::constant(1.0).unwrap());
    cfg.output_dir = dir.path().to_path_buf();
    let report = fem_convergence_probe(&cfg, &[3, 4, 5]).unwrap();
    for r in report.ratios() {
        assert!((1.7..=2.3).contains(&r), "{r}");
    }
    assert!(fem_convergence_probe(&cfg, &[3]).unwrap().ratios().is_empty());
}

#[test]
fn case_b_battery_passes() {
    let cfg = ExperimentConfig::preset_case("b").unwrap().with_level(4);
    let report = run_checks(&cfg, &CheckOptions::default()).unwrap();
    assert!(report.passed(), "{}", report.to_text());
    assert!(report.entries.iter().all(|e| e.status == CheckStatus::Pass));
}
