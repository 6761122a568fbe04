use proptest::prelude::*;

use descent_pde::experiment::reference::{decode, encode};
use descent_pde::linalg::{cg_jacobi_solve, spd_solve, SparseSpdMatrix};
use descent_pde::solvers::{line_search, LineSearchConfig};
use descent_pde::{build_lshape, CarreauParams, DiffusionModel, FemSystem};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random sparse, strictly diagonally dominant symmetric matrix.
fn dominant_matrix() -> impl Strategy<Value = SparseSpdMatrix> {
    (2usize..40)
        .prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n, -1.0f64..1.0), 0..4 * n)))
        .prop_map(|(n, offdiag)| {
            let mut row_sum = vec![0.0; n];
            let mut triplets = Vec::new();
            for (i, j, v) in offdiag {
                if i != j {
                    triplets.push((i, j, v));
                    triplets.push((j, i, v));
                    row_sum[i] += v.abs();
                    row_sum[j] += v.abs();
                }
            }
            for (i, s) in row_sum.iter().enumerate() {
                triplets.push((i, i, s + 1.0));
            }
            SparseSpdMatrix::from_triplets(n, &triplets).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cache_payload_round_trips(u in prop::collection::vec(-1e300f64..1e300, 0..200)) {
        let decoded = decode(&encode(&u), u.len()).unwrap();
        prop_assert_eq!(&*decoded, &u[..]);
    }

    #[test]
    fn psi_increment_is_a_difference(
        r in 1.01f64..1.99,
        s0 in 0.0f64..1e4,
        ds in 0.0f64..1e4,
    ) {
        let m = DiffusionModel::carreau(CarreauParams { mu_inf: 1.0, mu_0: 100.0, lambda: 2.0, r }).unwrap();
        let inc = m.psi_increment(s0, s0 + ds);
        let diff = m.psi(s0 + ds) - m.psi(s0);
        prop_assert!((inc - diff).abs() <= 1e-10 * m.psi(s0 + ds).max(1.0));
        prop_assert!(inc >= 0.0);
    }

    #[test]
    fn spd_solve_meets_its_tolerance(a in dominant_matrix(), seed in any::<u64>()) {
        let n = a.dim();
        let b: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64) % 97) as f64 - 48.0) / 7.0).collect();
        let x = spd_solve(&a, &b).unwrap();
        let ax = a.matvec(&x).unwrap();
        let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&r) <= 1e-12 * norm(&b).max(f64::MIN_POSITIVE) || norm(&b) == 0.0);
        let cg = cg_jacobi_solve(&a, &b, 1e-13, 10 * n).unwrap();
        let gap: Vec<f64> = cg.x.iter().zip(&x).map(|(p, q)| p - q).collect();
        prop_assert!(norm(&gap) <= 1e-9 * norm(&x).max(1.0));
    }

    #[test]
    fn quadratic_line_search_is_exact(
        c in 0.5f64..50.0,
        scale in 0.05f64..3.0,
        seed in 0u64..1000,
    ) {
        let sys = FemSystem::new(build_lshape(2).unwrap(), DiffusionModel::constant(c).unwrap()).unwrap();
        let u: Vec<f64> = (0..sys.num_dofs()).map(|i| (((seed + i as u64) * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
        let r = sys.residual(&u);
        let d: Vec<f64> = sys.riesz_solve(&r).unwrap().iter().map(|x| -scale * x / c).collect();
        let exact = 1.0 / scale;
        let cfg = LineSearchConfig { alpha_max: 100.0, ..LineSearchConfig::default() };
        let out = line_search(&sys, &u, &d, &cfg);
        prop_assert!((out.alpha - exact).abs() <= 1e-10 * exact, "{} vs {}", out.alpha, exact);
        prop_assert!(out.energy_change <= 0.0);
    }

    #[test]
    fn mesh_levels_are_consistent(level in 0u32..5) {
        let mesh = build_lshape(level).unwrap();
        prop_assert_eq!(mesh.num_triangles(), 6 << (2 * level));
        prop_assert!((mesh.total_area() - 3.0).abs() <= 1e-12);
        prop_assert!(mesh.validate().is_ok());
        let finer = build_lshape(level + 1).unwrap();
        let refined = mesh.refine_uniform();
        prop_assert_eq!(refined.num_triangles(), finer.num_triangles());
        prop_assert!((refined.total_area() - 3.0).abs() <= 1e-12);
        let key = |m: &descent_pde::Mesh| {
            let mut v: Vec<(i64, i64)> = m.vertices().iter().map(|p| ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)).collect();
            v.sort_unstable();
            v
        };
        prop_assert_eq!(key(&refined), key(&finer));
        prop_assert_eq!(refined.interior_dof_map().len(), finer.interior_dof_map().len());
    }
}
