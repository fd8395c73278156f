//! SLOPE / OSCAR regularized least squares.
//!
//! Solves
//!
//! ```text
//! min_x ½‖Ax − b‖² + Σ_i λ_i |x|↓_i,     λ_1 ≥ … ≥ λ_n ≥ 0, λ_1 > 0
//! ```
//!
//! with a semismooth Newton augmented Lagrangian method on the dual
//! ([`alm_solve`]), plus FISTA ([`apg_solve`]) and dual ADMM
//! ([`admm_solve`]) for comparison.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use slope_newt::{alm_solve, AlmConfig, LambdaSeq, ProblemData};
//!
//! let p = ProblemData::dense(DMatrix::identity(2, 2), DVector::from_column_slice(&[3.0, 3.0]))?;
//! let lam = LambdaSeq::new(vec![2.0, 1.0])?;
//! let r = alm_solve(&p, &lam, &AlmConfig::default(), None)?;
//! assert!(r.converged);
//! assert!((r.x[0] - 1.5).abs() < 1e-6);
//! # Ok::<(), slope_newt::Error>(())
//! ```

pub mod alm;
pub mod baselines;
pub mod design;
pub mod error;
pub mod jacobian;
pub mod path;
pub mod problem;
pub mod prox;
pub mod ssn;

pub use alm::{alm_solve, criteria_bound, AlmConfig};
pub use baselines::{admm_run, admm_solve, apg_solve, apg_solve_counted, AdmmConfig, AdmmIterate, ApgConfig, OpCounts};
pub use design::{CsrMatrix, DesignMatrix};
pub use error::{Error, Result};
pub use path::{run_path, GridSpec, PathGrid, PathPoint, PathResult, SolverSettings, Spacing, W2Rule};
pub use problem::{
    dual_infeasibility, dual_objective, kkt_residual, nnz999, oscar_factor_weights, oscar_weights,
    penalty_value, primal_objective, relative_duality_gap, synth_instance, Algorithm, IterRecord,
    LambdaSeq, ProblemData, SolveReport, SyntheticInstance,
};
pub use prox::{dual_ball_violation, prox_conjugate_scaled, prox_scaled, prox_sorted_l1, ProxResult};
