use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use wfblow_algebra::{is_param, Polynomial, RationalFunction, Var};
use wfblow_geometry::Stratum;
use wfblow_operators::{kbe_residual, OperatorSpec};

use crate::{ExtensionError, Result};

/// Rewrites `f`, given in barycentric variables, in the local coordinates of
/// the face spanned by `vertices`: coordinates off the face become 0 and the
/// reference vertex (the smallest) is eliminated through `Σ p = 1`.
pub fn localize(f: &RationalFunction, vertices: &[usize]) -> Result<RationalFunction> {
    let mut sorted = vertices.to_vec();
    sorted.sort_unstable();
    let Some(&reference) = sorted.first() else {
        return Err(ExtensionError::Domain("empty vertex set".into()));
    };
    let mut bindings = BTreeMap::new();
    for v in f.vars() {
        if is_param(v) {
            continue;
        }
        let vu = v as usize;
        if vu == reference {
            let rest = sorted.iter().skip(1).map(|&w| w as Var);
            let p = &Polynomial::one() - &Polynomial::sum_of_vars(rest);
            bindings.insert(v, RationalFunction::from_poly(p));
        } else if !sorted.contains(&vu) {
            bindings.insert(v, RationalFunction::zero());
        }
    }
    if bindings.is_empty() {
        return Ok(f.clone());
    }
    Ok(f.substitute(&bindings)?)
}

/// A solution `e^{λt} piece` of the backward equation on a simplex face,
/// certified exactly at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseSolution {
    stratum: Stratum,
    n: usize,
    piece: RationalFunction,
    time_factor: BigRational,
}

impl BaseSolution {
    /// `piece` may use any barycentric variables; it is rewritten in the
    /// face's local coordinates before certification.
    pub fn new(
        n: usize,
        vertices: &[usize],
        piece: RationalFunction,
        time_factor: BigRational,
    ) -> Result<Self> {
        let stratum = Stratum::simplex_face(n, vertices)?;
        let piece = localize(&piece, stratum.simplex())?;
        let op = OperatorSpec::simplex_on(n, stratum.simplex())?;
        let residual = kbe_residual(&op, &piece, &time_factor)?;
        if !residual.is_identically_zero() {
            return Err(ExtensionError::NotASolution(format!(
                "residual {residual} on {stratum}"
            )));
        }
        Ok(BaseSolution {
            stratum,
            n,
            piece,
            time_factor,
        })
    }

    pub fn stratum(&self) -> &Stratum {
        &self.stratum
    }

    pub fn vertices(&self) -> &[usize] {
        self.stratum.simplex()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn piece(&self) -> &RationalFunction {
        &self.piece
    }

    pub fn time_factor(&self) -> &BigRational {
        &self.time_factor
    }

    pub fn dim(&self) -> usize {
        self.stratum.dim()
    }
}

/// The stationary constant `value` on the vertex `v`.
pub fn vertex_constant(n: usize, v: usize, value: RationalFunction) -> Result<BaseSolution> {
    BaseSolution::new(n, &[v], value, BigRational::zero())
}

/// The stationary affine function `constant + Σ coeff_v p^v` on a face.
pub fn affine(
    n: usize,
    vertices: &[usize],
    constant: BigRational,
    coeffs: &[(usize, BigRational)],
) -> Result<BaseSolution> {
    let mut p = Polynomial::constant(constant);
    for (v, c) in coeffs {
        p.add_term(wfblow_algebra::Monomial::var(*v as Var), c.clone());
    }
    BaseSolution::new(
        n,
        vertices,
        RationalFunction::from_poly(p),
        BigRational::zero(),
    )
}

/// `e^{t} p^i p^j` on the face spanned by `vertices`, with `i != j` both
/// different from the face's reference vertex.
pub fn eigen_product(n: usize, vertices: &[usize], i: usize, j: usize) -> Result<BaseSolution> {
    if i == j {
        return Err(ExtensionError::Domain(
            "eigen product needs two distinct indices".into(),
        ));
    }
    let f = &RationalFunction::var(i as Var) * &RationalFunction::var(j as Var);
    BaseSolution::new(n, vertices, f, BigRational::from_integer(BigInt::from(1)))
}
