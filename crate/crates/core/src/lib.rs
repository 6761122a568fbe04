//! Fixed-point iterations as preconditioned steepest descent for the
//! quasilinear model problem `-div(mu(|grad u|^2) grad u) = g` on the
//! L-shaped domain, discretised by P1 finite elements.
//!
//! * [`mesh`]: structured triangulations of the L-shape.
//! * [`diffusion`]: the Carreau coefficient and its potential.
//! * [`fem`]: assembly of stiffness, Jacobian, load, residual and energy.
//! * [`linalg`]: sparse SPD storage and solves.
//! * [`solvers`]: Zarantonello, Kacanov and Newton iterations, and the
//!   preconditioned nonlinear conjugate gradient method built on them.
//! * [`experiment`]: reference solutions, the iteration-count table,
//!   property checks and a discretisation convergence probe.

pub mod diffusion;
pub mod experiment;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod solvers;

pub use diffusion::{CarreauParams, DiffusionModel};
pub use fem::{CoefficientVector, FemSystem};
pub use linalg::{spd_solve, SparseSpdMatrix};
pub use mesh::{build_lshape, DofMap, Mesh};
pub use solvers::{BetaRule, Method, Mode, SolverConfig};
