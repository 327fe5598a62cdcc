//! Stratified geometry of the probability simplex and the unit cube.
//!
//! Simplex points are stored in the coordinates `p^1..p^n`; the remaining
//! barycentric coordinate `p^0 = 1 - sum p^i` is always derived. Cube points
//! use the same index range `1..n` and have no 0th coordinate.

mod path;
mod point;
mod stratum;

pub use path::{IndexSet, OrderedPath};
pub use point::Point;
pub use stratum::{Stratum, StratumKind};

use std::collections::BTreeMap;

/// Snapping tolerance for boundary classification.
pub const EPS_GEOM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("classification error: {0}")]
    Classification(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Simplex,
    Cube,
}

impl std::str::FromStr for DomainKind {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simplex" => Ok(DomainKind::Simplex),
            "cube" => Ok(DomainKind::Cube),
            other => Err(GeometryError::Domain(format!(
                "unknown domain kind {other:?}"
            ))),
        }
    }
}

/// Binomial coefficient, exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// All `size`-element subsets of `items`, in lexicographic order.
pub fn subsets(items: &[usize], size: usize) -> Vec<Vec<usize>> {
    fn rec(
        items: &[usize],
        size: usize,
        start: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, size, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if size <= items.len() {
        rec(items, size, 0, &mut Vec::with_capacity(size), &mut out);
    }
    out
}

/// The `k`-dimensional open faces of the closed simplex or cube of dimension `n`.
///
/// Simplex faces are returned in lexicographic order of their vertex sets; cube
/// faces by free-coordinate set, then by the 0/1 pattern of the fixed coordinates.
pub fn enumerate_faces(n: usize, k: usize, kind: DomainKind) -> Result<Vec<Stratum>> {
    if k > n {
        return Err(GeometryError::Domain(format!(
            "face dimension {k} exceeds n = {n}"
        )));
    }
    match kind {
        DomainKind::Simplex => {
            let all: Vec<usize> = (0..=n).collect();
            subsets(&all, k + 1)
                .into_iter()
                .map(|vs| Stratum::simplex_face(n, &vs))
                .collect()
        }
        DomainKind::Cube => {
            let axes: Vec<usize> = (1..=n).collect();
            let mut out = Vec::with_capacity(binomial(n, k) << (n - k));
            for free in subsets(&axes, k) {
                let fixed_axes: Vec<usize> =
                    axes.iter().copied().filter(|a| !free.contains(a)).collect();
                for pattern in 0u32..(1u32 << fixed_axes.len()) {
                    let fixed: BTreeMap<usize, u8> = fixed_axes
                        .iter()
                        .enumerate()
                        .map(|(bit, &a)| (a, ((pattern >> (fixed_axes.len() - 1 - bit)) & 1) as u8))
                        .collect();
                    out.push(Stratum::cube_face(n, &free, fixed)?);
                }
            }
            Ok(out)
        }
    }
}

/// The unique open stratum of the closed domain containing `p`.
///
/// Coordinates within [`EPS_GEOM`] of 0 (or of 1 on the cube) are treated as
/// exactly on the boundary.
pub fn classify_point(p: &Point, n: usize, kind: DomainKind) -> Result<Stratum> {
    if p.n() != n {
        return Err(GeometryError::Classification(format!(
            "point has {} coordinates, expected {n}",
            p.n()
        )));
    }
    match kind {
        DomainKind::Simplex => {
            let mut vertices = Vec::new();
            for v in 0..=n {
                let x = p.barycentric(v);
                if !(-EPS_GEOM..=1.0 + EPS_GEOM).contains(&x) {
                    return Err(GeometryError::Classification(format!(
                        "barycentric coordinate p{v} = {x} outside the closed simplex"
                    )));
                }
                if x > EPS_GEOM {
                    vertices.push(v);
                }
            }
            if vertices.is_empty() {
                return Err(GeometryError::Classification(
                    "point has no positive coordinate".into(),
                ));
            }
            Stratum::simplex_face(n, &vertices)
        }
        DomainKind::Cube => {
            let mut free = Vec::new();
            let mut fixed = BTreeMap::new();
            for i in 1..=n {
                let x = p.get(i);
                if !(-EPS_GEOM..=1.0 + EPS_GEOM).contains(&x) {
                    return Err(GeometryError::Classification(format!(
                        "coordinate p{i} = {x} outside the closed cube"
                    )));
                }
                if x.abs() <= EPS_GEOM {
                    fixed.insert(i, 0);
                } else if (x - 1.0).abs() <= EPS_GEOM {
                    fixed.insert(i, 1);
                } else {
                    free.push(i);
                }
            }
            Stratum::cube_face(n, &free, fixed)
        }
    }
}

/// The extra boundary pieces created by the iterated blow-up along `path`.
///
/// Uses the disjoint formulation: the lower factor is the open face, the last
/// factor is the closed cube with its base vertex removed. Returns an empty list
/// when the path is too short for any blow-up step.
pub fn additional_faces(path: &OrderedPath) -> Vec<Stratum> {
    let n = path.n();
    let k = path.base_dim();
    if n < k + 2 {
        return Vec::new();
    }
    let tail_after = |j: usize| -> Vec<usize> { ((j + 1)..=n).map(|l| path.at(l)).collect() };
    let mut out = Vec::with_capacity(n - k - 1);
    for j in (k + 1)..n {
        let mut fixed = BTreeMap::new();
        fixed.insert(path.at(j), 0u8);
        let boxtimes = tail_after(j);
        let stratum = if k == 0 {
            let cube: Vec<usize> = (1..j).map(|l| path.at(l)).collect();
            Stratum::additional(Vec::new(), cube, fixed, boxtimes)
        } else if j == k + 1 {
            Stratum::additional(path.face_vertices(k), Vec::new(), fixed, boxtimes)
        } else {
            let cube: Vec<usize> = ((k + 2)..j).map(|l| path.at(l)).collect();
            Stratum::additional(path.face_vertices(k + 1), cube, fixed, boxtimes)
        };
        out.push(stratum);
    }
    out
}
