//! Numerical checks for the stratified constructions: an exact-arithmetic
//! finite-difference oracle, a face-by-face Dirichlet solver on the blown-up
//! cube, the stem restriction check, and the experiment suites behind
//! `wfblow verify`.

pub mod experiments;
pub mod fd;
pub mod grid;
pub mod report;
pub mod solve;
pub mod stem;
pub mod suites;

pub use experiments::{
    convergence_study, incompatibility_samples, max_principle, uniqueness, ConvergenceReport,
    IncompatibilityReport, MaxPrincipleReport, UniquenessReport,
};
pub use fd::{fd_residual, FdReport, FdRow, FD_STEP_DIVISOR};
pub use grid::GridSpec;
pub use report::{Bound, Case, CaseStatus, SuiteReport};
pub use solve::{
    solve_cube_interior, solve_dirichlet_cube, DirichletProblem, GridFunction, SolveReport,
    SOLVER_TOL,
};
pub use stem::{check_stem_lemma, StemEntry, StemReport, STEM_TOL};
pub use suites::{catalog_base, run_suite, Suite, SuiteOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("setup error: {0}")]
    Setup(String),
    #[error("solver stopped after {iterations} iterations at relative residual {achieved:e}")]
    Solver { achieved: f64, iterations: usize },
    #[error(transparent)]
    Algebra(#[from] wfblow_algebra::AlgebraError),
    #[error(transparent)]
    Operator(#[from] wfblow_operators::OperatorError),
    #[error(transparent)]
    Geometry(#[from] wfblow_geometry::GeometryError),
    #[error(transparent)]
    Extension(#[from] wfblow_extension::ExtensionError),
    #[error(transparent)]
    Blowup(#[from] wfblow_blowup::BlowupError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
