use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wfblow_algebra::{is_param, AlgebraError, RationalFunction, StratifiedFunction, Var};
use wfblow_geometry::{OrderedPath, Stratum};
use wfblow_operators::{kbe_residual, OperatorSpec};

use crate::base::localize;
use crate::{ExtensionError, Result};

/// Tolerance for numerically estimated boundary limits.
pub const EPS_BND: f64 = 1e-7;

/// Distances from the limit point used by [`radial_limit`].
pub const RADIAL_OFFSETS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintKind {
    /// The piece solves the backward equation on its face.
    Residual,
    /// The piece matches its neighbours on the facets of its face.
    Boundary,
    /// The top piece has direction dependent limits at a path face.
    Incompatibility,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintEntry {
    pub kind: ConstraintKind,
    /// Dimension of the path face the entry is about.
    pub dim: usize,
    /// Vertex set of the face that was checked.
    pub face: Vec<usize>,
    /// Largest deviation seen over the samples.
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtensionReport {
    pub path: Vec<usize>,
    pub n: usize,
    pub entries: Vec<ConstraintEntry>,
}

impl ExtensionReport {
    fn all(&self, kind: ConstraintKind) -> bool {
        self.entries
            .iter()
            .filter(|e| e.kind == kind)
            .all(|e| e.passed)
    }

    pub fn residuals_ok(&self) -> bool {
        self.all(ConstraintKind::Residual)
    }

    pub fn boundary_ok(&self) -> bool {
        self.all(ConstraintKind::Boundary)
    }

    /// Dimensions `d` at which the top piece has direction dependent limits.
    pub fn incompatibility_loci(&self) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.kind == ConstraintKind::Incompatibility && e.deviation > e.tolerance)
            .map(|e| e.dim)
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }
}

/// Richardson estimate of `lim_{t -> 0} g(t)` from the two smallest offsets,
/// assuming `g(t) = L + O(t)`.
pub fn radial_limit(g: impl Fn(f64) -> std::result::Result<f64, AlgebraError>) -> Result<f64> {
    let n = RADIAL_OFFSETS.len();
    let big = g(RADIAL_OFFSETS[n - 2])?;
    let small = g(RADIAL_OFFSETS[n - 1])?;
    let ratio = RADIAL_OFFSETS[n - 2] / RADIAL_OFFSETS[n - 1];
    Ok((ratio * small - big) / (ratio - 1.0))
}

fn eval_barycentric(
    f: &RationalFunction,
    b: &[f64],
    params: &[(Var, f64)],
) -> std::result::Result<f64, AlgebraError> {
    f.eval_with(&|v| lookup(v, b, params))
}

fn lookup(v: Var, b: &[f64], params: &[(Var, f64)]) -> f64 {
    if is_param(v) {
        params
            .iter()
            .find(|(p, _)| *p == v)
            .map_or(f64::NAN, |(_, x)| *x)
    } else {
        b[v as usize]
    }
}

/// Evaluation close to a pole: the usual pole guard would reject the points a
/// limit is taken along, so only an exactly vanishing factor is an error.
fn eval_near_pole(
    f: &RationalFunction,
    b: &[f64],
    params: &[(Var, f64)],
) -> std::result::Result<f64, AlgebraError> {
    let at = |v: Var| lookup(v, b, params);
    let mut den = 1.0;
    for (g, e) in f.denominator_factors() {
        den *= g.eval_f64(&at).powi(*e as i32);
    }
    if den == 0.0 || !den.is_finite() {
        return Err(AlgebraError::Pole {
            denominator: den,
            location: format!("{b:?}"),
        });
    }
    Ok(f.numerator().eval_f64(&at) / den)
}

/// Limit of `f` along the segment from `target` to `from` as it reaches
/// `from`; both are full barycentric vectors `(p^0, .., p^n)`.
pub fn directional_limit(
    f: &RationalFunction,
    from: &[f64],
    target: &[f64],
    params: &[(Var, f64)],
) -> Result<f64> {
    if from.len() != target.len() {
        return Err(ExtensionError::Domain(
            "points of different dimension".into(),
        ));
    }
    radial_limit(|t| {
        let p: Vec<f64> = from
            .iter()
            .zip(target)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect();
        eval_near_pole(f, &p, params)
    })
}

/// Random point in the open face spanned by `vertices`, kept a little away
/// from its boundary.
fn sample_face(rng: &mut ChaCha8Rng, n: usize, vertices: &[usize]) -> Vec<f64> {
    let m = vertices.len() as f64;
    let weights: Vec<f64> = vertices
        .iter()
        .map(|_| -rng.gen_range(1e-12f64..1.0).ln())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut b = vec![0.0; n + 1];
    for (&v, w) in vertices.iter().zip(&weights) {
        b[v] = 0.1 / m + 0.9 * w / total;
    }
    b
}

fn vertex(n: usize, v: usize) -> Vec<f64> {
    let mut e = vec![0.0; n + 1];
    e[v] = 1.0;
    e
}

fn piece_on<'a>(
    candidate: &'a StratifiedFunction,
    n: usize,
    face: &[usize],
) -> Result<&'a RationalFunction> {
    let stratum = Stratum::simplex_face(n, face)?;
    candidate
        .get(&stratum)
        .ok_or_else(|| ExtensionError::Domain(format!("candidate has no piece on {stratum}")))
}

/// Checks a candidate extension along `path`:
/// exact residuals on every path face, facet limits of each piece against
/// the piece below it (or 0 on facets cut out by the path), and the faces at
/// which the top piece has direction dependent limits.
///
/// Incompatibility entries pass when the jump locus is exactly `d = k..n-2`.
pub fn check_extension_constraints(
    candidate: &StratifiedFunction,
    path: &OrderedPath,
    samples: usize,
    seed: u64,
    params: &[(Var, f64)],
) -> Result<ExtensionReport> {
    let n = path.n();
    let k = path.base_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    let lambda = candidate.time_factor();

    for d in k..=n {
        let face = path.face_vertices(d);
        let piece = piece_on(candidate, n, &face)?;
        let op = OperatorSpec::simplex_on(n, &face)?;
        let residual = kbe_residual(&op, piece, lambda)?;
        let exact = residual.is_identically_zero();
        let mut deviation: f64 = 0.0;
        if !exact {
            for _ in 0..samples.max(1) {
                let q = sample_face(&mut rng, n, &face);
                let r = eval_barycentric(&residual, &q, params).unwrap_or(f64::INFINITY);
                deviation = deviation.max(r.abs());
            }
            if deviation == 0.0 {
                deviation = f64::MIN_POSITIVE;
            }
        }
        entries.push(ConstraintEntry {
            kind: ConstraintKind::Residual,
            dim: d,
            face,
            deviation,
            tolerance: 0.0,
            passed: exact,
        });
    }

    for d in (k + 1)..=n {
        let face = path.face_vertices(d);
        let piece = piece_on(candidate, n, &face)?;
        let below = piece_on(candidate, n, &path.face_vertices(d - 1))?;
        let tail: Vec<usize> = (k..d).map(|j| path.at(j)).collect();
        for &v in &face {
            let facet: Vec<usize> = face.iter().copied().filter(|&w| w != v).collect();
            // Facets off the path only see the piece itself, restricted exactly.
            let restricted = if v == path.at(d) || tail.contains(&v) {
                None
            } else {
                Some(localize(piece, &facet)?)
            };
            let mut deviation: f64 = 0.0;
            for _ in 0..samples {
                let q = sample_face(&mut rng, n, &facet);
                let limit = directional_limit(piece, &q, &vertex(n, v), params)?;
                let expected = if v == path.at(d) {
                    eval_barycentric(below, &q, params)?
                } else if let Some(r) = &restricted {
                    eval_barycentric(r, &q, params)?
                } else {
                    0.0
                };
                deviation = deviation.max((limit - expected).abs());
            }
            entries.push(ConstraintEntry {
                kind: ConstraintKind::Boundary,
                dim: d,
                face: facet,
                deviation,
                tolerance: EPS_BND,
                passed: deviation <= EPS_BND,
            });
        }
    }

    let top = piece_on(candidate, n, &path.face_vertices(n))?;
    for d in k..n {
        let face = path.face_vertices(d);
        let tail: Vec<usize> = ((d + 1)..=n).map(|j| path.at(j)).collect();
        let direction = |ramp: bool| {
            let mut w = vec![0.0; n + 1];
            let raw: Vec<f64> = (1..=tail.len())
                .map(|i| if ramp { i as f64 } else { 1.0 })
                .collect();
            let total: f64 = raw.iter().sum();
            for (&v, r) in tail.iter().zip(&raw) {
                w[v] = r / total;
            }
            w
        };
        let (flat, ramp) = (direction(false), direction(true));
        let mut deviation: f64 = 0.0;
        for _ in 0..samples {
            let q = sample_face(&mut rng, n, &face);
            let a = directional_limit(top, &q, &flat, params)?;
            let b = directional_limit(top, &q, &ramp, params)?;
            deviation = deviation.max((a - b).abs());
        }
        let predicted = d + 2 <= n;
        entries.push(ConstraintEntry {
            kind: ConstraintKind::Incompatibility,
            dim: d,
            face,
            deviation,
            tolerance: EPS_BND,
            passed: (deviation > EPS_BND) == predicted,
        });
    }

    Ok(ExtensionReport {
        path: path.indices().to_vec(),
        n,
        entries,
    })
}
