//! Wright-Fisher backward operators applied exactly to rational functions.
//!
//! Three families are provided: `L*` on a simplex face in its local
//! coordinates, the symmetric form `Λ*` in all barycentric coordinates, and the
//! cube-side operator obtained after the iterated blow-up along an ordered path.
//! Coefficients are stored bare; the factor ½ is applied by [`apply_operator`].

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use wfblow_algebra::{Polynomial, RationalFunction, Var};
use wfblow_geometry::{OrderedPath, Stratum, StratumKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, OperatorError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OperatorKind {
    SimplexL,
    SymmetricLambda,
    Transformed,
}

impl OperatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OperatorKind::SimplexL => "simplex-L",
            OperatorKind::SymmetricLambda => "symmetric-Lambda",
            OperatorKind::Transformed => "transformed",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplex-L" | "simplex" | "L" => Ok(OperatorKind::SimplexL),
            "symmetric-Lambda" | "symmetric" | "Lambda" => Ok(OperatorKind::SymmetricLambda),
            "transformed" | "transformed-L" => Ok(OperatorKind::Transformed),
            other => Err(OperatorError::Domain(format!(
                "unknown operator kind {other:?}"
            ))),
        }
    }
}

/// A second-order operator `½ Σ a^{ij} ∂_i ∂_j` on a stratum, with its
/// coefficient table precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec {
    kind: OperatorKind,
    n: usize,
    path: Option<OrderedPath>,
    stratum: Stratum,
    flips: Vec<bool>,
    /// Upper triangle `i <= j`; absent entries are zero.
    table: BTreeMap<(Var, Var), RationalFunction>,
}

fn var(i: usize) -> RationalFunction {
    RationalFunction::var(i as Var)
}

fn one() -> RationalFunction {
    RationalFunction::one()
}

/// The Wright-Fisher table `x^i (δ_ij - x^j)` over `coords`.
fn simplex_block(coords: &[usize], table: &mut BTreeMap<(Var, Var), RationalFunction>) {
    for (a, &i) in coords.iter().enumerate() {
        table.insert((i as Var, i as Var), &var(i) * &(&one() - &var(i)));
        for &j in &coords[a + 1..] {
            table.insert((i as Var, j as Var), -&(&var(i) * &var(j)));
        }
    }
}

impl OperatorSpec {
    /// `L*_n` on the full simplex.
    pub fn simplex(n: usize) -> Self {
        let all: Vec<usize> = (0..=n).collect();
        OperatorSpec::simplex_on(n, &all).expect("full vertex set is valid")
    }

    /// `L*` on the simplex face spanned by `vertices`, in its local coordinates.
    pub fn simplex_on(n: usize, vertices: &[usize]) -> Result<Self> {
        let stratum =
            Stratum::simplex_face(n, vertices).map_err(|e| OperatorError::Domain(e.to_string()))?;
        let mut table = BTreeMap::new();
        simplex_block(stratum.simplex_coords(), &mut table);
        Ok(OperatorSpec {
            kind: OperatorKind::SimplexL,
            n,
            path: None,
            stratum,
            flips: Vec::new(),
            table,
        })
    }

    /// `Λ*_n` in the barycentric variables `x^0..x^n`.
    pub fn symmetric(n: usize) -> Self {
        let all: Vec<usize> = (0..=n).collect();
        OperatorSpec::symmetric_on(n, &all).expect("full vertex set is valid")
    }

    pub fn symmetric_on(n: usize, vertices: &[usize]) -> Result<Self> {
        let stratum =
            Stratum::simplex_face(n, vertices).map_err(|e| OperatorError::Domain(e.to_string()))?;
        let mut table = BTreeMap::new();
        simplex_block(stratum.simplex(), &mut table);
        Ok(OperatorSpec {
            kind: OperatorKind::SymmetricLambda,
            n,
            path: None,
            stratum,
            flips: Vec::new(),
            table,
        })
    }

    /// The blown-up operator along `path`. `flips` holds one orientation flag
    /// per blow-up step (empty means all unflipped).
    pub fn transformed(path: &OrderedPath, flips: &[bool]) -> Result<Self> {
        let stratum = transformed_domain(path)?;
        OperatorSpec::transformed_on(path, flips, stratum)
    }

    fn transformed_on(path: &OrderedPath, flips: &[bool], stratum: Stratum) -> Result<Self> {
        let n = path.n();
        let k = path.base_dim();
        let steps = n.saturating_sub(k + 1);
        let flips = if flips.is_empty() {
            vec![false; steps]
        } else if flips.len() == steps {
            flips.to_vec()
        } else {
            return Err(OperatorError::Domain(format!(
                "{} orientation flags given for {steps} blow-up steps",
                flips.len()
            )));
        };
        let mut table = BTreeMap::new();
        let first_cube = if k == 0 { 1 } else { k + 2 };
        let fixed = stratum.fixed();
        let is_free = |j: usize| !fixed.contains_key(&path.at(j));
        let free_max = (first_cube..=n).filter(|&j| is_free(j)).max();
        let cutoff = free_max
            .and_then(|fm| {
                (first_cube..fm)
                    .filter(|&j| fixed.get(&path.at(j)) == Some(&0))
                    .max()
            })
            .unwrap_or(0);
        if k > 0 && cutoff == 0 {
            let block: Vec<usize> = path
                .face_vertices(k + 1)
                .into_iter()
                .filter(|&v| v != 0)
                .collect();
            simplex_block(&block, &mut table);
        }
        // Position `l` is the target of step `n - l + 1` when `l >= k + 2`.
        let factor = |l: usize| -> RationalFunction {
            let x = var(path.at(l));
            if l >= k + 2 && flips[n - l] {
                &one() - &x
            } else {
                x
            }
        };
        for i in first_cube.max(cutoff + 1)..=n {
            if !is_free(i) {
                continue;
            }
            let x = var(path.at(i));
            let mut coeff = &x * &(&one() - &x);
            for l in (cutoff.max(k) + 1)..i {
                if is_free(l) {
                    coeff = &coeff / &factor(l);
                }
            }
            let v = path.at(i) as Var;
            table.insert((v, v), coeff);
        }
        Ok(OperatorSpec {
            kind: OperatorKind::Transformed,
            n,
            path: Some(path.clone()),
            stratum,
            flips,
            table,
        })
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn path(&self) -> Option<&OrderedPath> {
        self.path.as_ref()
    }

    pub fn stratum(&self) -> &Stratum {
        &self.stratum
    }

    pub fn flips(&self) -> &[bool] {
        &self.flips
    }

    /// Coordinates differentiated by this operator.
    pub fn free_vars(&self) -> Vec<Var> {
        match self.kind {
            OperatorKind::SymmetricLambda => {
                self.stratum.simplex().iter().map(|&v| v as Var).collect()
            }
            _ => self
                .stratum
                .free_coords()
                .iter()
                .map(|&v| v as Var)
                .collect(),
        }
    }

    /// Nonzero upper-triangle entries `((i, j), a^{ij})` with `i <= j`.
    pub fn entries(&self) -> impl Iterator<Item = (&(Var, Var), &RationalFunction)> {
        self.table.iter()
    }

    /// The bare coefficient `a^{ij}` of `∂_i ∂_j`.
    pub fn coefficient(&self, i: usize, j: usize) -> Result<RationalFunction> {
        let free = self.free_vars();
        for idx in [i, j] {
            if !free.contains(&(idx as Var)) {
                return Err(OperatorError::Domain(format!(
                    "p{idx} is not a free coordinate of {}",
                    self.stratum
                )));
            }
        }
        let key = (i.min(j) as Var, i.max(j) as Var);
        Ok(self
            .table
            .get(&key)
            .cloned()
            .unwrap_or_else(RationalFunction::zero))
    }

    /// Coordinates whose vanishing makes some coefficient singular.
    pub fn pole_coordinates(&self) -> Vec<Var> {
        let mut out: Vec<Var> = self
            .table
            .values()
            .flat_map(|c| c.denominator_factors().iter().flat_map(|(g, _)| g.vars()))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// The open domain of the blown-up operator: the full cube for base dimension
/// 0, otherwise the product of the face spanned by `I_{k+1}` with the cube in
/// the remaining path coordinates.
pub fn transformed_domain(path: &OrderedPath) -> Result<Stratum> {
    let n = path.n();
    let k = path.base_dim();
    if k >= n {
        return Err(OperatorError::Domain(format!(
            "path {path} has no steps above its base face"
        )));
    }
    if !path.face_vertices(k).contains(&0) {
        return Err(OperatorError::Domain(format!(
            "base face of path {path} must contain vertex 0"
        )));
    }
    if k == 0 {
        let free: Vec<usize> = (1..=n).collect();
        return Stratum::cube_face(n, &free, BTreeMap::new())
            .map_err(|e| OperatorError::Domain(e.to_string()));
    }
    let cube = ((k + 2)..=n).map(|j| path.at(j)).collect();
    Ok(Stratum::product(
        path.face_vertices(k + 1),
        cube,
        BTreeMap::new(),
    ))
}

fn check_free(spec: &OperatorSpec, f: &RationalFunction) -> Result<()> {
    let free = spec.free_vars();
    if let Some(&v) = f
        .vars()
        .iter()
        .find(|&&v| !wfblow_algebra::is_param(v) && !free.contains(&v))
    {
        return Err(OperatorError::Domain(format!(
            "{} is not a free coordinate of {}",
            wfblow_algebra::format_var(v),
            spec.stratum
        )));
    }
    Ok(())
}

/// `½ Σ a^{ij} ∂_i ∂_j f`, exactly.
pub fn apply_operator(spec: &OperatorSpec, f: &RationalFunction) -> Result<RationalFunction> {
    check_free(spec, f)?;
    let mut first: BTreeMap<Var, RationalFunction> = BTreeMap::new();
    let mut acc = RationalFunction::zero();
    for (&(i, j), a) in &spec.table {
        let di = first.entry(i).or_insert_with(|| f.derivative(i)).clone();
        let dij = di.derivative(j);
        if dij.is_identically_zero() {
            continue;
        }
        let term = &(a * &dij);
        acc = if i == j {
            &acc + term
        } else {
            &(&acc + term) + term
        };
    }
    Ok(acc.scale(&BigRational::new(BigInt::from(1), BigInt::from(2))))
}

/// `L f + λ f`, the stationary residual of the separable ansatz `e^{λt} f`.
pub fn kbe_residual(
    spec: &OperatorSpec,
    f: &RationalFunction,
    time_factor: &BigRational,
) -> Result<RationalFunction> {
    check_free(spec, f)?;
    if cleared_residual(spec, f, time_factor).is_some_and(|p| p.is_zero()) {
        return Ok(RationalFunction::zero());
    }
    Ok(&apply_operator(spec, f)? + &f.scale(time_factor))
}

/// `D³ (L f + λ f)` as a polynomial, for `f = N / D` and polynomial
/// coefficients; `None` if a coefficient has a denominator.
///
/// With `L₀ = Σ a^{ij} ∂_i ∂_j` and `B(u, w) = Σ a^{ij} ∂_i u ∂_j w` over all
/// ordered pairs, `D³ L f = ½ D² L₀N − D B(N, D) − ½ N D L₀D + N B(D, D)`.
fn cleared_residual(
    spec: &OperatorSpec,
    f: &RationalFunction,
    time_factor: &BigRational,
) -> Option<Polynomial> {
    let num = f.numerator();
    let den = f.denominator();
    let mut first: BTreeMap<Var, (Polynomial, Polynomial)> = BTreeMap::new();
    let mut grad = |v: Var| {
        first
            .entry(v)
            .or_insert_with(|| (num.derivative(v), den.derivative(v)))
            .clone()
    };
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let two = BigRational::from_integer(BigInt::from(2));
    let (mut l0_num, mut l0_den, mut b_num_den, mut b_den_den) = (
        Polynomial::zero(),
        Polynomial::zero(),
        Polynomial::zero(),
        Polynomial::zero(),
    );
    for (&(i, j), a) in &spec.table {
        let a = a.as_polynomial()?;
        let ((ni, di), (nj, dj)) = (grad(i), grad(j));
        let (a, cross) = if i == j {
            (a.clone(), &ni * &dj)
        } else {
            (a.scale(&two), (&(&ni * &dj) + &(&nj * &di)).scale(&half))
        };
        l0_num = &l0_num + &(&a * &ni.derivative(j));
        l0_den = &l0_den + &(&a * &di.derivative(j));
        b_num_den = &b_num_den + &(&a * &cross);
        b_den_den = &b_den_den + &(&a * &(&di * &dj));
    }
    let leading = &(&l0_num.scale(&half) + &num.scale(time_factor)) * &(&den * &den);
    let middle = &den * &(&b_num_den + &(num * &l0_den).scale(&half));
    Some(&(&leading - &middle) + &(num * &b_den_den))
}

/// The operator induced on `face`, a stratum in the closure of the operator's domain.
///
/// Simplex operators restrict to the same operator on the sub-simplex. The
/// blown-up operator keeps only summands of free coordinates; a coordinate
/// fixed at 0 below the last free path position removes every summand up to
/// it, and the remaining denominators run over the free positions after it.
pub fn restrict_operator(spec: &OperatorSpec, face: &Stratum) -> Result<OperatorSpec> {
    if !face.in_closure_of(&spec.stratum) {
        return Err(OperatorError::Domain(format!(
            "{face} is not in the closure of {}",
            spec.stratum
        )));
    }
    match spec.kind {
        OperatorKind::SimplexL | OperatorKind::SymmetricLambda => {
            if face.kind() != StratumKind::SimplexFace {
                return Err(OperatorError::Domain(format!(
                    "{face} is not a simplex face"
                )));
            }
            if spec.kind == OperatorKind::SimplexL {
                OperatorSpec::simplex_on(spec.n, face.simplex())
            } else {
                OperatorSpec::symmetric_on(spec.n, face.simplex())
            }
        }
        OperatorKind::Transformed => {
            let path = spec.path.as_ref().expect("transformed specs carry a path");
            if face.simplex() != spec.stratum.simplex() || face.boxtimes().is_some() {
                return Err(OperatorError::Domain(format!(
                    "{face} does not keep the simplex factor of {}",
                    spec.stratum
                )));
            }
            if spec.flips.iter().any(|&f| f) && !face.fixed().is_empty() {
                return Err(OperatorError::Domain(
                    "restriction of flipped charts is not supported".into(),
                ));
            }
            OperatorSpec::transformed_on(path, &spec.flips, face.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wfblow_algebra::parse_expr;

    fn expr(s: &str) -> RationalFunction {
        parse_expr(s).unwrap()
    }

    fn path(ix: &[usize]) -> OrderedPath {
        OrderedPath::new(ix.to_vec(), ix.len() - 1).unwrap()
    }

    fn cube_face(n: usize, fixed: &[(usize, u8)]) -> Stratum {
        let fixed: BTreeMap<usize, u8> = fixed.iter().copied().collect();
        let free: Vec<usize> = (1..=n).filter(|i| !fixed.contains_key(i)).collect();
        Stratum::cube_face(n, &free, fixed).unwrap()
    }

    #[test]
    fn simplex_coefficients() {
        let l = OperatorSpec::simplex(2);
        assert_eq!(l.coefficient(1, 2).unwrap(), expr("-p1*p2"));
        assert_eq!(l.coefficient(2, 1).unwrap(), expr("-p1*p2"));
        assert_eq!(l.coefficient(1, 1).unwrap(), expr("p1*(1-p1)"));
        assert!(l.coefficient(0, 1).is_err());
    }

    #[test]
    fn transformed_coefficients() {
        let t = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
        assert!(t.coefficient(2, 2).unwrap().equals(&expr("p2*(1-p2)/p1")));
        assert!(t.coefficient(1, 2).unwrap().is_identically_zero());
        assert!(t.coefficient(1, 1).unwrap().equals(&expr("p1*(1-p1)")));
        let t3 = OperatorSpec::transformed(&path(&[0, 1, 2, 3]), &[]).unwrap();
        assert!(t3
            .coefficient(3, 3)
            .unwrap()
            .equals(&expr("p3*(1-p3)/(p1*p2)")));
        assert_eq!(t3.pole_coordinates(), vec![1, 2]);
    }

    #[test]
    fn transformed_with_positive_base_dim() {
        let p = OrderedPath::new(vec![1, 2, 3], 3).unwrap();
        let t = OperatorSpec::transformed(&p, &[]).unwrap();
        assert_eq!(t.stratum().simplex(), &[0, 1, 2]);
        assert_eq!(t.stratum().cube(), &[3]);
        assert!(t.coefficient(1, 2).unwrap().equals(&expr("-p1*p2")));
        assert!(t.coefficient(3, 3).unwrap().equals(&expr("p3*(1-p3)/p2")));
        assert!(
            OperatorSpec::transformed(&OrderedPath::new(vec![1, 0, 2, 3], 3).unwrap(), &[])
                .is_err()
        );
    }

    #[test]
    fn apply_examples() {
        let l = OperatorSpec::simplex(2);
        assert!(apply_operator(&l, &expr("p1"))
            .unwrap()
            .is_identically_zero());
        assert_eq!(apply_operator(&l, &expr("p1*p2")).unwrap(), expr("-p1*p2"));
        let t = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
        assert!(apply_operator(&t, &expr("(1-p1)*(1-p2)"))
            .unwrap()
            .is_identically_zero());
        assert!(apply_operator(&t, &expr("p1^2"))
            .unwrap()
            .equals(&expr("p1*(1-p1)")));
        assert!(apply_operator(&l, &expr("p0")).is_err());
    }

    #[test]
    fn symmetric_form_on_full_simplex() {
        let lam = OperatorSpec::symmetric(2);
        let f = expr("p0*p1*p2");
        let direct = apply_operator(&lam, &f).unwrap();
        let p0 = expr("1 - p1 - p2");
        let sub: BTreeMap<Var, RationalFunction> = [(0, p0)].into_iter().collect();
        let via_l =
            apply_operator(&OperatorSpec::simplex(2), &f.substitute(&sub).unwrap()).unwrap();
        assert!(direct.substitute(&sub).unwrap().equals(&via_l));
    }

    #[test]
    fn restriction_rule() {
        let t3 = OperatorSpec::transformed(&path(&[0, 1, 2, 3]), &[]).unwrap();
        let r = restrict_operator(&t3, &cube_face(3, &[(2, 0)])).unwrap();
        assert_eq!(r.entries().count(), 1);
        assert!(r.coefficient(3, 3).unwrap().equals(&expr("p3*(1-p3)")));
        assert!(r.coefficient(1, 1).unwrap().is_identically_zero());

        let t2 = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
        let r = restrict_operator(&t2, &cube_face(2, &[(2, 1)])).unwrap();
        assert_eq!(r.entries().count(), 1);
        assert!(r.coefficient(1, 1).unwrap().equals(&expr("p1*(1-p1)")));

        let r = restrict_operator(&t2, &cube_face(2, &[(1, 0)])).unwrap();
        assert_eq!(r.entries().count(), 1);
        assert!(r.coefficient(2, 2).unwrap().equals(&expr("p2*(1-p2)")));

        let r = restrict_operator(&t2, &cube_face(2, &[(2, 0)])).unwrap();
        assert!(r.coefficient(1, 1).unwrap().equals(&expr("p1*(1-p1)")));

        let r = restrict_operator(&t3, &cube_face(3, &[(1, 1)])).unwrap();
        assert!(r.coefficient(3, 3).unwrap().equals(&expr("p3*(1-p3)/p2")));
    }

    #[test]
    fn simplex_restriction() {
        let l = OperatorSpec::simplex(2);
        let face = Stratum::simplex_face(2, &[0, 1]).unwrap();
        let r = restrict_operator(&l, &face).unwrap();
        assert_eq!(r.coefficient(1, 1).unwrap(), expr("p1*(1-p1)"));
        assert!(r.coefficient(2, 2).is_err());
        let edge = Stratum::simplex_face(2, &[1, 2]).unwrap();
        let r = restrict_operator(&l, &edge).unwrap();
        assert_eq!(r.free_vars(), vec![2]);
        let outside = Stratum::simplex_face(3, &[0, 3]).unwrap();
        assert!(restrict_operator(&l, &outside).is_err());
    }

    #[test]
    fn flipped_denominators() {
        let t = OperatorSpec::transformed(&path(&[0, 1, 2, 3]), &[false, true]).unwrap();
        // Step 2 targets position 2, so its coordinate enters later denominators flipped.
        assert!(t
            .coefficient(3, 3)
            .unwrap()
            .equals(&expr("p3*(1-p3)/(p1*(1-p2))")));
    }

    #[test]
    fn cleared_residual_agrees_with_quotient_rule() {
        let spec = OperatorSpec::simplex(3);
        let zero = BigRational::from_integer(BigInt::from(0));
        let one = BigRational::from_integer(BigInt::from(1));
        let cases = [
            ("c*(1-p1-p2-p3)*p1/(p1+p2+p3)*p2/(p2+p3)", &zero, true),
            ("(1-p1-p2-p3)*p1/(p1+p2+p3)", &zero, true),
            ("p1*p2", &one, true),
            ("p1*p2", &zero, false),
            ("p1/(p1+p2)", &zero, true),
            ("p1^2/(p1+p2)", &zero, false),
            ("p1^2/(p2+p3)^2", &zero, false),
        ];
        for (text, lambda, solves) in cases {
            let f = expr(text);
            let cleared = cleared_residual(&spec, &f, lambda).unwrap();
            let generic = &apply_operator(&spec, &f).unwrap() + &f.scale(lambda);
            assert_eq!(cleared.is_zero(), solves, "{text}");
            assert_eq!(generic.is_identically_zero(), solves, "{text}");
            assert!(
                kbe_residual(&spec, &f, lambda).unwrap().equals(&generic),
                "{text}"
            );
        }
        let transformed = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
        assert!(cleared_residual(&transformed, &expr("p1"), &zero).is_none());
    }
}
