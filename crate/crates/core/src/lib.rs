//! Extended Newton method for inclusion problems `F(x) in C`, `C = R^p_- x {0}^q`,
//! with semi-local convergence certificates built from scalar majorant functions.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cone;
pub mod error;
pub mod majorant;
pub mod minstep;
pub mod poly;
pub mod problem;
pub mod solver;

pub use cone::ProductCone;
pub use error::{Error, Result};
pub use majorant::{Majorant, MajorantSpec, MajorantTrace, PerturbedMajorant};
pub use minstep::{min_norm_step, sublinear_image_norm, LinearInclusionSubproblem, NewtonStep};
pub use poly::PolyExpr;
pub use problem::{catalog, catalog_problem, load_problem, save_problem, Expected, InclusionProblem};
pub use solver::{newton_solve, newton_solve_with_majorant, verify_majorant_bounds, SolveConfig, SolveStatus, SolveTrace};
pub use certify::{compute_b, kantorovich_certificate, robustness_ball, smale_certificate, Certificate, Family, Provenance};
