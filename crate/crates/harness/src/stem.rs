use std::collections::BTreeSet;

use serde::Serialize;
use wfblow_algebra::{RationalFunction, StratifiedFunction, Var};
use wfblow_geometry::{enumerate_faces, DomainKind, OrderedPath, Stratum};
use wfblow_operators::{restrict_operator, OperatorSpec};

use crate::fd::fd_residual;
use crate::grid::GridSpec;
use crate::{HarnessError, Result};

/// Residual bound for the restricted equation on each face.
pub const STEM_TOL: f64 = 1e-9;

/// Distances to the face at which the full coefficients are sampled.
pub const STEM_OFFSETS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

/// Relative size below which a rescaled coefficient counts as vanishing.
const RETAIN_THRESHOLD: f64 = 1e-9;

/// Allowed spread of the common factor between the brute-force limits and
/// the restricted coefficients.
const FACTOR_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StemEntry {
    pub face: String,
    pub dim: usize,
    /// Largest path position fixed at 0 below the last free position, if any.
    pub maxind: Option<usize>,
    /// Coordinates whose summand the restricted operator keeps.
    pub retained: Vec<usize>,
    pub residual: f64,
    /// The retained set and coefficients agree with the limit of the full
    /// operator rescaled by the dominant power of the distance to the face.
    pub brute_force_ok: bool,
    pub passed: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StemReport {
    pub path: Vec<usize>,
    pub n: usize,
    pub per_axis: usize,
    pub tolerance: f64,
    pub entries: Vec<StemEntry>,
}

impl StemReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }
}

fn maxind(path: &OrderedPath, face: &Stratum) -> Option<usize> {
    let fixed = face.fixed();
    let n = path.n();
    let last_free = (1..=n)
        .filter(|&j| !fixed.contains_key(&path.at(j)))
        .max()?;
    (1..last_free)
        .filter(|&j| fixed.get(&path.at(j)) == Some(&0))
        .max()
}

/// Point approaching `face` at distance `eps`: free coordinates at `base`,
/// coordinates pinned at 0 set to `eps`, pinned at 1 set to `1 - eps`.
fn approach(face: &Stratum, base: &[f64], eps: f64) -> Vec<f64> {
    let mut x = base.to_vec();
    for (&v, &b) in face.fixed() {
        x[v] = if b == 0 { eps } else { 1.0 - eps };
    }
    x
}

/// Evaluation without the pole guard; only an exactly vanishing denominator
/// is rejected, since the samples sit deliberately close to poles.
fn eval_raw(f: &RationalFunction, x: &[f64]) -> std::result::Result<f64, String> {
    let at = |v: Var| x.get(v as usize).copied().unwrap_or(f64::NAN);
    let den: f64 = f
        .denominator_factors()
        .iter()
        .map(|(g, e)| g.eval_f64(&at).powi(*e as i32))
        .product();
    if den == 0.0 || !den.is_finite() {
        return Err(format!("{f} has a pole at {x:?}"));
    }
    Ok(f.numerator().eval_f64(&at) / den)
}

/// Compares the restricted operator with a direct limit of the full one: each
/// free coefficient is sampled at [`STEM_OFFSETS`], the dominant growth power
/// `E` is read off, and `eps^E a^{jj}` is extrapolated to the face. The
/// surviving summands must be exactly the restricted ones, and their limits
/// must be one common positive multiple of the restricted coefficients.
fn brute_force_agrees(
    full: &OperatorSpec,
    restricted: &OperatorSpec,
    face: &Stratum,
) -> std::result::Result<(), String> {
    let n = full.n();
    let free = face.free_coords();
    let coefficient = |j: usize| full.coefficient(j, j).map_err(|e| e.to_string());
    let kept: BTreeSet<usize> = restricted
        .entries()
        .map(|(&(i, _), _)| i as usize)
        .collect();
    let samples: [f64; 3] = [0.37, 0.52, 0.71];
    for (s, &shift) in samples.iter().enumerate() {
        let mut base = vec![0.0; n + 1];
        for (m, &v) in free.iter().enumerate() {
            base[v] = (shift + 0.13 * (m + s) as f64) % 0.8 + 0.1;
        }
        let mut values: Vec<(usize, Vec<f64>)> = Vec::new();
        for &j in &free {
            let a = coefficient(j)?;
            let row: Vec<f64> = STEM_OFFSETS
                .iter()
                .map(|&e| eval_raw(&a, &approach(face, &base, e)))
                .collect::<std::result::Result<_, _>>()?;
            values.push((j, row));
        }
        let growth = |row: &[f64]| -> i32 {
            let last = row.len() - 1;
            if row[last] == 0.0 || row[last - 1] == 0.0 {
                return 0;
            }
            (row[last] / row[last - 1]).abs().log10().round() as i32
        };
        let exponent = values
            .iter()
            .map(|(_, row)| growth(row))
            .max()
            .unwrap_or(0)
            .max(0);
        let last = STEM_OFFSETS.len() - 1;
        let (e_big, e_small) = (STEM_OFFSETS[last - 1], STEM_OFFSETS[last]);
        let ratio = e_big / e_small;
        let limits: Vec<(usize, f64)> = values
            .iter()
            .map(|(j, row)| {
                let big = e_big.powi(exponent) * row[last - 1];
                let small = e_small.powi(exponent) * row[last];
                (*j, (ratio * small - big) / (ratio - 1.0))
            })
            .collect();
        let scale = limits.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        let retained: BTreeSet<usize> = limits
            .iter()
            .filter(|(_, b)| b.abs() > RETAIN_THRESHOLD * scale)
            .map(|(j, _)| *j)
            .collect();
        if retained != kept {
            return Err(format!(
                "limit keeps {retained:?}, restriction keeps {kept:?}"
            ));
        }
        let mut factors = Vec::new();
        for (j, b) in limits.iter().filter(|(j, _)| kept.contains(j)) {
            let r = restricted.coefficient(*j, *j).map_err(|e| e.to_string())?;
            let at_face = eval_raw(&r, &approach(face, &base, 0.0))?;
            factors.push(b / at_face);
        }
        if let (Some(lo), Some(hi)) = (
            factors.iter().copied().reduce(f64::min),
            factors.iter().copied().reduce(f64::max),
        ) {
            if lo <= 0.0 || (hi - lo) > FACTOR_TOL * hi {
                return Err(format!(
                    "limit / restriction ratios {factors:?} are not one positive factor"
                ));
            }
        }
    }
    Ok(())
}

/// Residual of the restricted equation on every face of dimension `1..=n` of
/// the cube, computed with the finite-difference oracle on an `N`-grid per
/// face, together with the brute-force check of the index-deletion rule.
pub fn check_stem_lemma(
    u: &StratifiedFunction,
    path: &OrderedPath,
    n: usize,
    per_axis: usize,
) -> Result<StemReport> {
    if path.n() != n || path.base_dim() != 0 {
        return Err(HarnessError::Setup(format!(
            "the stem check needs a path from a vertex in dimension {n}, got {path}"
        )));
    }
    let full = OperatorSpec::transformed(path, &[])?;
    let mut entries = Vec::new();
    for dim in 1..=n {
        for face in enumerate_faces(n, dim, DomainKind::Cube)? {
            let spec = restrict_operator(&full, &face)?;
            let retained = spec.entries().map(|(&(i, _), _)| i as usize).collect();
            let brute = brute_force_agrees(&full, &spec, &face);
            let grid = GridSpec::new(n, face.clone(), per_axis)?;
            let (residual, note) = match fd_residual(u, &spec, &grid, &[]) {
                Ok(r) if r.skipped == 0 => (r.max_residual, None),
                Ok(r) => (
                    f64::INFINITY,
                    Some(format!("{} of {} nodes hit a pole", r.skipped, r.nodes)),
                ),
                Err(e) => (f64::INFINITY, Some(e.to_string())),
            };
            let note = note.or_else(|| brute.as_ref().err().cloned());
            let brute_force_ok = brute.is_ok();
            entries.push(StemEntry {
                face: face.to_string(),
                dim,
                maxind: maxind(path, &face),
                retained,
                residual,
                brute_force_ok,
                passed: brute_force_ok && residual <= STEM_TOL,
                note,
            });
        }
    }
    Ok(StemReport {
        path: path.indices().to_vec(),
        n,
        per_axis,
        tolerance: STEM_TOL,
        entries,
    })
}
