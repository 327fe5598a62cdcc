//! Blow-up charts `(p^σ, p^ρ) ↦ (p^σ + p^ρ, p^ρ / (p^σ + p^ρ))`, their
//! iteration along an ordered index path, the induced dictionary between
//! simplex faces and faces of the blown-up product domain, and the transport
//! of extended solutions and operators into the new coordinates.

mod chain;
mod chart;
mod faces;
mod transform;

pub use chain::{make_chain, BlowupChain};
pub use chart::{make_chart, BlowupChart};
pub use faces::{map_face, map_face_inverse, standard_facets, FaceDictionary};
pub use transform::{pullback_defect, transform_extension, transform_operator, transform_solution};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BlowupError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("no smooth image: {0}")]
    NoSmoothImage(String),
    #[error("{0} lies on the blown-up locus")]
    BlownUpLocus(String),
    #[error(transparent)]
    Algebra(#[from] wfblow_algebra::AlgebraError),
    #[error(transparent)]
    Operator(#[from] wfblow_operators::OperatorError),
    #[error(transparent)]
    Geometry(#[from] wfblow_geometry::GeometryError),
    #[error(transparent)]
    Extension(#[from] wfblow_extension::ExtensionError),
}

pub type Result<T> = std::result::Result<T, BlowupError>;
