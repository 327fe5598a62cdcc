//! Pathwise extension of solutions of the Wright-Fisher backward equation from
//! a face of the simplex through the faces `Δ_{k+1}, .., Δ_n` of an ordered
//! index path, plus executable checks of the extension constraints.

mod base;
mod constraints;
mod extend;

pub use base::{affine, eigen_product, localize, vertex_constant, BaseSolution};
pub use constraints::{
    check_extension_constraints, directional_limit, radial_limit, ConstraintEntry, ConstraintKind,
    ExtensionReport, EPS_BND, RADIAL_OFFSETS,
};
pub use extend::{
    extend_along_path, extend_final_condition, project_pi, superpose, ExtensionResult,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtensionError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("base is not a solution: {0}")]
    NotASolution(String),
    #[error(transparent)]
    Algebra(#[from] wfblow_algebra::AlgebraError),
    #[error(transparent)]
    Operator(#[from] wfblow_operators::OperatorError),
    #[error(transparent)]
    Geometry(#[from] wfblow_geometry::GeometryError),
}

pub type Result<T> = std::result::Result<T, ExtensionError>;
