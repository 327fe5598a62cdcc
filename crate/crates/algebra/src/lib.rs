//! Exact multivariate polynomials and rational functions over coordinate
//! variables, with differentiation, substitution and binary64 evaluation.
//!
//! Variable `v` in `0..=n` is the coordinate `p^v` (or `p̃^v` on the cube
//! side). Single-letter symbolic parameters such as `c` live at
//! `PARAM_BASE + letter`.

mod compiled;
mod parse;
mod poly;
mod rational;
mod stratified;

pub use compiled::CompiledRational;
pub use parse::{format_var, parse_expr, parse_expr_on};
pub use poly::{Monomial, Polynomial};
pub use rational::RationalFunction;
pub use stratified::StratifiedFunction;

use num_rational::BigRational;
use wfblow_geometry::{classify_point, DomainKind, Point};

/// Variable identifier.
pub type Var = u32;

/// First variable id used for symbolic parameters.
pub const PARAM_BASE: Var = 1000;

/// Smallest denominator magnitude accepted by numeric evaluation.
pub const EPS_DEN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlgebraError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("pole: denominator {denominator:e} at {location}")]
    Pole { denominator: f64, location: String },
    #[error("unbound parameter {0}")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, AlgebraError>;

/// Variable id of the single-letter parameter `name`.
pub fn param(name: char) -> Var {
    PARAM_BASE + name as Var
}

pub fn is_param(v: Var) -> bool {
    v >= PARAM_BASE
}

/// Exact rational from an `f64`, preserving its binary value.
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Value of `f` at `p`; variable 0 reads the derived `p^0`.
///
/// Fails on unbound parameters, and near poles with the stratum of `p` in the
/// error.
pub fn evaluate(f: &RationalFunction, p: &Point) -> Result<f64> {
    evaluate_with_params(f, p, &[])
}

/// Like [`evaluate`], with values for symbolic parameters.
pub fn evaluate_with_params(f: &RationalFunction, p: &Point, params: &[(Var, f64)]) -> Result<f64> {
    let n = p.n();
    for v in f.vars() {
        if v as usize > n && !params.iter().any(|&(w, _)| w == v) {
            return Err(AlgebraError::UnboundParameter(format_var(v)));
        }
    }
    let lookup = |v: Var| -> f64 {
        if (v as usize) <= n {
            p.barycentric(v as usize)
        } else {
            params
                .iter()
                .find(|&&(w, _)| w == v)
                .map_or(f64::NAN, |&(_, x)| x)
        }
    };
    f.eval_with(&lookup).map_err(|e| match e {
        AlgebraError::Pole { denominator, .. } => AlgebraError::Pole {
            denominator,
            location: locate(p),
        },
        other => other,
    })
}

fn locate(p: &Point) -> String {
    let n = p.n();
    classify_point(p, n, DomainKind::Simplex)
        .or_else(|_| classify_point(p, n, DomainKind::Cube))
        .map(|s| s.to_string())
        .unwrap_or_else(|_| format!("unclassified point ({p})"))
}
