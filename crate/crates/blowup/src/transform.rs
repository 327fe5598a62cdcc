use std::collections::BTreeMap;

use wfblow_algebra::{RationalFunction, StratifiedFunction, Var};
use wfblow_extension::ExtensionResult;
use wfblow_geometry::{enumerate_faces, DomainKind, Stratum};
use wfblow_operators::{apply_operator, OperatorSpec};

use crate::chart::{one_minus, var};
use crate::{BlowupChain, BlowupError, FaceDictionary, Result};

/// Restriction of a function on the blown-up domain to one of its faces:
/// pinned coordinates take their values, simplex coordinates off the face
/// vanish, and the face's own reference vertex is eliminated.
/// `block` is the vertex set of the domain's simplex factor.
fn restrict(f: &RationalFunction, face: &Stratum, block: &[usize]) -> Result<RationalFunction> {
    let mut bindings: BTreeMap<Var, RationalFunction> = face
        .fixed()
        .iter()
        .map(|(&v, &b)| (v as Var, RationalFunction::from_int(b as i64)))
        .collect();
    for &v in block {
        if v != 0 && !face.simplex().contains(&v) {
            bindings.insert(v as Var, RationalFunction::zero());
        }
    }
    if let Some(reference) = face.reference_vertex() {
        if reference != 0 {
            let mut rest = RationalFunction::one();
            for &v in face.simplex_coords() {
                rest = &rest - &var(v);
            }
            bindings.insert(reference as Var, rest);
        }
    }
    if bindings.is_empty() {
        return Ok(f.clone());
    }
    Ok(f.substitute(&bindings)?)
}

/// Carries the extension along `chain` into blown-up coordinates.
///
/// The result is `ū^{i_k, i_{k+1}} · ∏_{j ≥ k+2} (1 - p̃^{i_j})` restricted to
/// the image of every path face, and each piece is certified against the
/// direct substitution of the chain inverse into the extension piece. For base
/// dimension 0 the closed form is polynomial and is recorded on every face of
/// the closed cube.
pub fn transform_solution(
    ext: &ExtensionResult,
    chain: &BlowupChain,
) -> Result<StratifiedFunction> {
    if ext.path() != chain.path() {
        return Err(BlowupError::Domain(format!(
            "extension path {} differs from chain path {}",
            ext.path(),
            chain.path()
        )));
    }
    let path = chain.path();
    let n = chain.n();
    let k = chain.base_dim();
    let mut closed = ext.piece(k + 1).clone();
    for j in (k + 2)..=n {
        let x = var(path.at(j));
        let factor = if chain.flipped_at(j) {
            x
        } else {
            one_minus(&x)
        };
        closed = &closed * &factor;
    }
    let block = chain.domain()?.simplex().to_vec();
    let mut out = StratifiedFunction::new(ext.pieces().time_factor().clone());
    for d in k..=n {
        let face = Stratum::simplex_face(n, &path.face_vertices(d))?;
        let image = chain.map_face(&face)?;
        let piece = restrict(&closed, &image, &block)?;
        let pushed = restrict(&ext.piece(d).substitute(chain.inverse())?, &image, &block)?;
        if !piece.equals(&pushed) {
            return Err(BlowupError::Domain(format!(
                "transformed piece on {image} disagrees with the pushforward: {piece} vs {pushed}"
            )));
        }
        out.insert(image, piece);
    }
    if k == 0 {
        for dim in 0..=n {
            for face in enumerate_faces(n, dim, DomainKind::Cube)? {
                if out.get(&face).is_none() {
                    let piece = restrict(&closed, &face, &block)?;
                    out.insert(face, piece);
                }
            }
        }
    }
    Ok(out)
}

/// [`transform_solution`] that also accepts paths one step above their base
/// face, where the transformation is the identity.
pub fn transform_extension(ext: &ExtensionResult, flips: &[bool]) -> Result<StratifiedFunction> {
    let chain = BlowupChain::build(ext.path(), flips, true)?;
    transform_solution(ext, &chain)
}

/// The operator in blown-up coordinates along `chain`.
pub fn transform_operator(chain: &BlowupChain, n: usize) -> Result<OperatorSpec> {
    if n != chain.n() {
        return Err(BlowupError::Domain(format!(
            "chain acts in dimension {}, not {n}",
            chain.n()
        )));
    }
    Ok(OperatorSpec::transformed(chain.path(), chain.flips())?)
}

/// `(L f)∘Φ⁻¹ - L̃(f∘Φ⁻¹)` for a function `f` of the simplex coordinates
/// `p^1..p^n`; it vanishes identically when `L̃` is the transformed operator.
pub fn pullback_defect(chain: &BlowupChain, f: &RationalFunction) -> Result<RationalFunction> {
    let n = chain.n();
    let simplex = OperatorSpec::simplex(n);
    let transformed = transform_operator(chain, n)?;
    let lhs = apply_operator(&simplex, f)?.substitute(chain.inverse())?;
    let rhs = apply_operator(&transformed, &f.substitute(chain.inverse())?)?;
    Ok(&lhs - &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wfblow_algebra::{param, parse_expr};
    use wfblow_extension::{extend_along_path, vertex_constant};
    use wfblow_geometry::{OrderedPath, Point};

    #[test]
    fn vertex_constant_on_the_square() {
        let path = OrderedPath::parse("0,1,2", None).unwrap();
        let base = vertex_constant(2, 0, RationalFunction::var(param('c'))).unwrap();
        let ext = extend_along_path(&base, &path).unwrap();
        let chain = crate::make_chain(&path, 2, &[]).unwrap();
        let u = transform_solution(&ext, &chain).unwrap();
        let top = Stratum::cube_face(2, &[1, 2], BTreeMap::new()).unwrap();
        assert!(u
            .get(&top)
            .unwrap()
            .equals(&parse_expr("c*(1 - p1)*(1 - p2)").unwrap()));
        assert_eq!(u.len(), 9);
        let q = Point::new(vec![0.5, 0.6]).unwrap();
        let v = u
            .evaluate_with_params(&q, 0.0, DomainKind::Cube, &[(param('c'), 1.0)])
            .unwrap();
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn edge_path_is_the_identity() {
        let path = OrderedPath::parse("0,1", None).unwrap();
        let ext = extend_along_path(
            &vertex_constant(1, 0, parse_expr("c").unwrap()).unwrap(),
            &path,
        )
        .unwrap();
        let u = transform_extension(&ext, &[]).unwrap();
        let top = Stratum::cube_face(1, &[1], BTreeMap::new()).unwrap();
        assert!(u
            .get(&top)
            .unwrap()
            .equals(&parse_expr("c*(1 - p1)").unwrap()));
    }

    #[test]
    fn operator_examples() {
        let chain =
            crate::make_chain(&OrderedPath::parse("0,1,2,3", None).unwrap(), 3, &[]).unwrap();
        let op = transform_operator(&chain, 3).unwrap();
        assert!(op
            .coefficient(3, 3)
            .unwrap()
            .equals(&parse_expr("p3*(1 - p3)/(p1*p2)").unwrap()));
        assert!(transform_operator(&chain, 4).is_err());
        let lifted =
            crate::make_chain(&OrderedPath::new(vec![1, 2, 3], 3).unwrap(), 3, &[]).unwrap();
        let op = transform_operator(&lifted, 3).unwrap();
        assert!(op
            .coefficient(1, 1)
            .unwrap()
            .equals(&parse_expr("p1*(1 - p1)").unwrap()));
        assert!(op
            .coefficient(3, 3)
            .unwrap()
            .equals(&parse_expr("p3*(1 - p3)/p2").unwrap()));
        let defect = pullback_defect(&chain, &parse_expr("p1*p2^2 + p3").unwrap()).unwrap();
        assert!(defect.is_identically_zero(), "{defect}");
    }
}
