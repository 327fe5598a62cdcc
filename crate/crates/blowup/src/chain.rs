use std::collections::BTreeMap;

use serde_json::{json, Value};
use wfblow_algebra::{RationalFunction, Var};
use wfblow_geometry::{OrderedPath, Point, Stratum};
use wfblow_operators::transformed_domain;

use crate::chart::{make_chart, map_to_json, one_minus, var, BlowupChart, CompiledMap};
use crate::{BlowupError, Result};

/// The composite of the blow-up steps along a path. Step `m` blows up the pair
/// `(i_{n-m}, i_{n-m+1})`, so the steps run from the end of the path towards
/// its base face; the composite touches only `i_{k+1}..i_n`.
#[derive(Debug, Clone)]
pub struct BlowupChain {
    path: OrderedPath,
    flips: Vec<bool>,
    steps: Vec<BlowupChart>,
    forward: BTreeMap<Var, RationalFunction>,
    inverse: BTreeMap<Var, RationalFunction>,
    compiled_forward: CompiledMap,
    compiled_inverse: CompiledMap,
}

/// Builds the chain along `path` in dimension `n` with one orientation flag
/// per step (an empty list means unflipped).
pub fn make_chain(path: &OrderedPath, n: usize, flips: &[bool]) -> Result<BlowupChain> {
    if path.n() != n {
        return Err(BlowupError::Domain(format!(
            "path {path} lives in dimension {}, not {n}",
            path.n()
        )));
    }
    BlowupChain::build(path, flips, false)
}

impl BlowupChain {
    /// With `allow_empty` a path one step above its base face yields the
    /// identity chain instead of an error.
    pub(crate) fn build(path: &OrderedPath, flips: &[bool], allow_empty: bool) -> Result<Self> {
        let n = path.n();
        let k = path.base_dim();
        transformed_domain(path)?;
        let count = n - k - 1;
        if count == 0 && !allow_empty {
            return Err(BlowupError::Domain(format!(
                "path {path} is too short for a blow-up step"
            )));
        }
        let flips = match flips.len() {
            0 => vec![false; count],
            len if len == count => flips.to_vec(),
            len => {
                return Err(BlowupError::Domain(format!(
                    "{len} orientation flags given for {count} steps"
                )))
            }
        };
        let mut steps = Vec::with_capacity(count);
        let mut forward: BTreeMap<Var, RationalFunction> = BTreeMap::new();
        let mut inverse: BTreeMap<Var, RationalFunction> = BTreeMap::new();
        for m in 1..=count {
            let chart = make_chart(path.at(n - m), path.at(n - m + 1), flips[m - 1])?;
            let mut updated = forward.clone();
            for (&v, f) in chart.forward() {
                updated.insert(v, f.substitute(&forward)?);
            }
            forward = updated;
            for &v in chart.forward().keys() {
                inverse.entry(v).or_insert_with(|| var(v as usize));
            }
            for g in inverse.values_mut() {
                *g = g.substitute(chart.inverse())?;
            }
            steps.push(chart);
        }
        let chain = BlowupChain {
            path: path.clone(),
            flips,
            steps,
            compiled_forward: CompiledMap::new(&forward),
            compiled_inverse: CompiledMap::new(&inverse),
            forward,
            inverse,
        };
        chain.check_closed_forms()?;
        Ok(chain)
    }

    pub fn path(&self) -> &OrderedPath {
        &self.path
    }

    pub fn n(&self) -> usize {
        self.path.n()
    }

    pub fn base_dim(&self) -> usize {
        self.path.base_dim()
    }

    pub fn flips(&self) -> &[bool] {
        &self.flips
    }

    pub fn steps(&self) -> &[BlowupChart] {
        &self.steps
    }

    /// Blown-up coordinates as functions of the simplex coordinates.
    pub fn forward(&self) -> &BTreeMap<Var, RationalFunction> {
        &self.forward
    }

    /// Simplex coordinates as functions of the blown-up coordinates.
    pub fn inverse(&self) -> &BTreeMap<Var, RationalFunction> {
        &self.inverse
    }

    /// Whether the coordinate at path position `l` is orientation reversed.
    pub fn flipped_at(&self, l: usize) -> bool {
        l >= self.base_dim() + 2 && self.flips[self.n() - l]
    }

    /// The open domain of the blown-up coordinates.
    pub fn domain(&self) -> Result<Stratum> {
        Ok(transformed_domain(&self.path)?)
    }

    /// Image of a simplex point; points on the blown-up locus are rejected.
    pub fn apply(&self, p: &Point) -> Result<Point> {
        self.compiled_forward.apply(p)
    }

    pub fn apply_inverse(&self, q: &Point) -> Result<Point> {
        self.compiled_inverse.apply(q)
    }

    /// The composite forward map written directly through the tail sums
    /// `S_j = p^{i_j} + .. + p^{i_n}`.
    pub fn closed_forward(&self) -> BTreeMap<Var, RationalFunction> {
        let n = self.n();
        let k = self.base_dim();
        let sum = |j: usize| {
            let mut s = RationalFunction::zero();
            for l in j..=n {
                s = &s + &var(self.path.at(l));
            }
            s
        };
        let mut out = BTreeMap::new();
        if k + 1 > n {
            return out;
        }
        out.insert(self.path.at(k + 1) as Var, sum(k + 1));
        for j in (k + 2)..=n {
            let top = if self.flipped_at(j) {
                var(self.path.at(j - 1))
            } else {
                sum(j)
            };
            out.insert(self.path.at(j) as Var, &top / &sum(j - 1));
        }
        out
    }

    /// The composite inverse as products of the blown-up coordinates.
    pub fn closed_inverse(&self) -> BTreeMap<Var, RationalFunction> {
        let n = self.n();
        let k = self.base_dim();
        let q = |l: usize| {
            let x = var(self.path.at(l));
            if self.flipped_at(l) {
                one_minus(&x)
            } else {
                x
            }
        };
        let mut out = BTreeMap::new();
        let mut prefix = RationalFunction::one();
        for j in (k + 1)..=n {
            prefix = &prefix * &q(j);
            let value = if j < n {
                &prefix * &one_minus(&q(j + 1))
            } else {
                prefix.clone()
            };
            out.insert(self.path.at(j) as Var, value);
        }
        out
    }

    fn check_closed_forms(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Ok(());
        }
        for (name, built, closed) in [
            ("forward", &self.forward, self.closed_forward()),
            ("inverse", &self.inverse, self.closed_inverse()),
        ] {
            let agree = built.len() == closed.len()
                && built
                    .iter()
                    .all(|(v, f)| closed.get(v).is_some_and(|g| f.equals(g)));
            if !agree {
                return Err(BlowupError::Domain(format!(
                    "composed {name} map of chain {} disagrees with its closed form",
                    self.path
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        json!({
            "path": self.path.indices(),
            "n": self.n(),
            "flips": self.flips,
            "steps": self.steps.iter().map(BlowupChart::to_json).collect::<Vec<_>>(),
            "forward": map_to_json(&self.forward),
            "inverse": map_to_json(&self.inverse),
        })
    }
}
