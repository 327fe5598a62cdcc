use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use wfblow_algebra::{Polynomial, RationalFunction, StratifiedFunction, Var};
use wfblow_geometry::{OrderedPath, Stratum};

use crate::base::{localize, BaseSolution};
use crate::{ExtensionError, Result};

fn coord(v: usize) -> RationalFunction {
    RationalFunction::var(v as Var)
}

/// Sum of barycentric coordinates over `vertices`, with `p^0` expanded on the
/// face spanned by `face`.
fn barycentric_sum(vertices: &[usize], face: &[usize]) -> Result<RationalFunction> {
    let mut s = RationalFunction::zero();
    for &v in vertices {
        s = &s + &coord(v);
    }
    localize(&s, face)
}

/// Substitution bindings for the projection onto the base face along the path
/// prefix `i_k..i_d`: `i_k` collects the mass of the prefix, the other prefix
/// coordinates become 0, and everything else is unchanged.
///
/// The image is written in the local coordinates of `I_d`; when `i_k = 0` the
/// binding of `p^0` is `1 - Σ` over the base vertices off the path.
pub fn project_pi(path: &OrderedPath, d: usize) -> Result<BTreeMap<Var, RationalFunction>> {
    let k = path.base_dim();
    let n = path.n();
    if d < k || d > n {
        return Err(ExtensionError::Domain(format!(
            "face dimension {d} outside {k}..={n} for path {path}"
        )));
    }
    let face = path.face_vertices(d);
    let prefix: Vec<usize> = (k..=d).map(|j| path.at(j)).collect();
    let mut out = BTreeMap::new();
    let head = path.at(k);
    let mass = if head == 0 {
        let off_path: Vec<usize> = path
            .face_vertices(k)
            .into_iter()
            .filter(|&v| v != 0)
            .collect();
        let p = &Polynomial::one() - &Polynomial::sum_of_vars(off_path.iter().map(|&v| v as Var));
        RationalFunction::from_poly(p)
    } else {
        barycentric_sum(&prefix, &face)?
    };
    out.insert(head as Var, mass);
    for &v in &prefix[1..] {
        out.insert(v as Var, RationalFunction::zero());
    }
    Ok(out)
}

/// The pieces `ū^{i_k..i_d}` on every face `Δ_d` of a path, `d = k..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionResult {
    path: OrderedPath,
    base: BaseSolution,
    pieces: StratifiedFunction,
}

impl ExtensionResult {
    pub fn path(&self) -> &OrderedPath {
        &self.path
    }

    pub fn base(&self) -> &BaseSolution {
        &self.base
    }

    pub fn pieces(&self) -> &StratifiedFunction {
        &self.pieces
    }

    pub fn into_pieces(self) -> StratifiedFunction {
        self.pieces
    }

    /// The piece on `Δ_d^{(I_d)}`.
    pub fn piece(&self, d: usize) -> &RationalFunction {
        let face =
            Stratum::simplex_face(self.path.n(), &self.path.face_vertices(d)).expect("path face");
        self.pieces
            .get(&face)
            .expect("every path face carries a piece")
    }
}

fn extension_pieces(
    base_piece: &RationalFunction,
    path: &OrderedPath,
    time_factor: BigRational,
) -> Result<StratifiedFunction> {
    let n = path.n();
    let k = path.base_dim();
    let mut out = StratifiedFunction::new(time_factor);
    out.insert(
        Stratum::simplex_face(n, &path.face_vertices(k))?,
        base_piece.clone(),
    );
    for d in (k + 1)..=n {
        let face = path.face_vertices(d);
        let projected = if base_piece.vars().contains(&(path.at(k) as Var)) {
            base_piece.substitute(&project_pi(path, d)?)?
        } else {
            base_piece.clone()
        };
        let mut weight = RationalFunction::one();
        for j in k..d {
            let tail: Vec<usize> = (j..=d).map(|l| path.at(l)).collect();
            let num = localize(&coord(path.at(j)), &face)?;
            weight = &weight * &(&num / &barycentric_sum(&tail, &face)?);
        }
        let piece = localize(&(&projected * &weight), &face)?;
        out.insert(Stratum::simplex_face(n, &face)?, piece);
    }
    Ok(out)
}

fn check_base_face(base_vertices: &[usize], path: &OrderedPath) -> Result<()> {
    let expected = path.face_vertices(path.base_dim());
    if base_vertices != expected.as_slice() {
        return Err(ExtensionError::Domain(format!(
            "base face {base_vertices:?} does not match the base face {expected:?} of path {path}"
        )));
    }
    Ok(())
}

/// Extends `base` along `path`; the time factor carries over unchanged.
pub fn extend_along_path(base: &BaseSolution, path: &OrderedPath) -> Result<ExtensionResult> {
    if base.n() != path.n() {
        return Err(ExtensionError::Domain(format!(
            "base lives in dimension {} but the path in {}",
            base.n(),
            path.n()
        )));
    }
    check_base_face(base.vertices(), path)?;
    let pieces = extension_pieces(base.piece(), path, base.time_factor().clone())?;
    Ok(ExtensionResult {
        path: path.clone(),
        base: base.clone(),
        pieces,
    })
}

/// The same product formula applied to final data on the base face.
pub fn extend_final_condition(
    f_base: &RationalFunction,
    path: &OrderedPath,
) -> Result<StratifiedFunction> {
    let base_face = path.face_vertices(path.base_dim());
    let local = localize(f_base, &base_face)?;
    extension_pieces(&local, path, BigRational::zero())
}

/// Sum of the extensions of several `(base, path)` pairs, adding pieces that
/// land on the same face. All bases must share one time factor.
pub fn superpose(items: &[(BaseSolution, OrderedPath)]) -> Result<StratifiedFunction> {
    let Some((first, _)) = items.first() else {
        return Ok(StratifiedFunction::default());
    };
    let lambda = first.time_factor().clone();
    let mut out = StratifiedFunction::new(lambda.clone());
    for (base, path) in items {
        if *base.time_factor() != lambda {
            return Err(ExtensionError::Domain(
                "superposed bases must share a time factor".into(),
            ));
        }
        for (stratum, piece) in extend_along_path(base, path)?.pieces().pieces() {
            out.accumulate(stratum.clone(), piece.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::{affine, vertex_constant};
    use wfblow_algebra::{param, parse_expr};

    fn expr(s: &str) -> RationalFunction {
        parse_expr(s).unwrap()
    }

    #[test]
    fn projection_examples() {
        let p = OrderedPath::new(vec![0, 1, 2], 2).unwrap();
        let b = project_pi(&p, 2).unwrap();
        assert_eq!(b[&0], expr("1"));
        assert_eq!(b[&1], expr("0"));
        assert_eq!(b[&2], expr("0"));
        let q = OrderedPath::new(vec![1, 2], 2).unwrap();
        let b = project_pi(&q, 2).unwrap();
        assert_eq!(b[&1], expr("p1 + p2"));
        assert_eq!(b[&2], expr("0"));
        let b = project_pi(&q, 1).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b[&1], expr("p1"));
        assert!(project_pi(&q, 0).is_err());
        assert!(project_pi(&q, 3).is_err());
    }

    #[test]
    fn vertex_constant_extensions() {
        let c = RationalFunction::var(param('c'));
        let base = vertex_constant(1, 0, c.clone()).unwrap();
        let ext = extend_along_path(&base, &OrderedPath::new(vec![0, 1], 1).unwrap()).unwrap();
        assert!(ext.piece(1).equals(&expr("c*(1-p1)")));

        let base = vertex_constant(2, 0, c).unwrap();
        let ext = extend_along_path(&base, &OrderedPath::new(vec![0, 1, 2], 2).unwrap()).unwrap();
        assert!(ext.piece(2).equals(&expr("c*(1-p1-p2)*p1/(p1+p2)")));
        let at = ext.piece(2).eval_with(&|v| match v {
            1 => 0.2,
            2 => 0.3,
            _ => 1.0,
        });
        assert!((at.unwrap() - 0.2).abs() < 1e-15);
        assert!(ext.piece(1).equals(&expr("c*(1-p1)")));
    }

    #[test]
    fn affine_edge_extension() {
        let (alpha, beta) = (
            BigRational::from_integer(2.into()),
            BigRational::from_integer(5.into()),
        );
        let base = affine(2, &[0, 1], alpha, &[(1, beta)]).unwrap();
        let ext = extend_along_path(&base, &OrderedPath::new(vec![1, 2], 2).unwrap()).unwrap();
        assert!(ext.piece(2).equals(&expr("(2 + 5*(p1+p2))*p1/(p1+p2)")));
    }

    #[test]
    fn mismatched_base_is_rejected() {
        let base = vertex_constant(2, 1, expr("1")).unwrap();
        assert!(extend_along_path(&base, &OrderedPath::new(vec![0, 1, 2], 2).unwrap()).is_err());
    }

    #[test]
    fn final_condition_uses_same_formula() {
        let path = OrderedPath::new(vec![0, 1, 2], 2).unwrap();
        let f = extend_final_condition(&expr("c"), &path).unwrap();
        let base = vertex_constant(2, 0, expr("c")).unwrap();
        let ext = extend_along_path(&base, &path).unwrap();
        for (s, piece) in ext.pieces().pieces() {
            assert!(f.get(s).unwrap().equals(piece));
        }
    }

    #[test]
    fn superposition_adds_overlaps() {
        let a = vertex_constant(1, 0, expr("1")).unwrap();
        let b = vertex_constant(1, 1, expr("1")).unwrap();
        let sum = superpose(&[
            (a, OrderedPath::new(vec![0, 1], 1).unwrap()),
            (b, OrderedPath::new(vec![1, 0], 1).unwrap()),
        ])
        .unwrap();
        let edge = Stratum::simplex_face(1, &[0, 1]).unwrap();
        assert!(sum.get(&edge).unwrap().equals(&expr("1")));
        assert_eq!(sum.len(), 3);
    }
}
