//! Solver for quadratically constrained basis pursuit,
//!
//! ```text
//! minimize ‖x‖₁  subject to  ‖y − A x‖₂ ≤ η,   A ∈ ℝ^{m×d}, m < d,
//! ```
//!
//! by ADMM over the splitting `x = x'`, `z = z'`, `(x', z') ∈ {A x' = z'}`.
//! The graph projection reuses a single Cholesky factor of `A Aᵀ + I`, and
//! termination is certified by primal/dual residuals and a duality gap.
//!
//! ```
//! use qcbp::{generate, solve, GeneratorParams, SolveStatus, SolverConfig};
//!
//! let params = GeneratorParams::new(100, 0.4, 0.1, 0.1, 7).with_strict_interior(true);
//! let instance = generate(&params).unwrap();
//! let report = solve(&instance, &SolverConfig::default()).unwrap();
//! assert_eq!(report.status, SolveStatus::Converged);
//! ```

pub mod duality;
pub mod error;
pub mod graph_projection;
pub mod instance;
pub mod io;
pub mod linalg;
pub mod proximal;
pub mod reference;
pub mod solver;

pub use duality::{dual_objective, duality_gap, Certificates};
pub use error::{Error, Result};
pub use graph_projection::GraphProjector;
pub use instance::{generate, GeneratorParams, ProblemInstance, Violation};
pub use io::{read_history, read_instance, write_history, write_instance, ProblemManifest};
pub use linalg::{DenseMatrix, LowerTriangular};
pub use solver::{
    evaluate_certificates, iterate_once, solve, IterationRecord, PrimalDualState,
    SolutionCertificate, SolveReport, SolveStatus, SolverConfig,
};
