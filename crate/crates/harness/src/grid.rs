use num_bigint::BigInt;
use num_rational::BigRational;
use wfblow_geometry::{Stratum, StratumKind};

use crate::{HarnessError, Result};

/// Uniform tensor grid with spacing `1/N` on an open stratum, boundary nodes
/// included. The axes are the stratum's local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    n: usize,
    stratum: Stratum,
    per_axis: usize,
    dims: Vec<usize>,
}

impl GridSpec {
    /// Grid in dimension `n` over `stratum` with `per_axis` cells per axis.
    pub fn new(n: usize, stratum: Stratum, per_axis: usize) -> Result<Self> {
        if per_axis < 4 {
            return Err(HarnessError::Setup(format!(
                "grid needs N >= 4, got {per_axis}"
            )));
        }
        if stratum.boxtimes().is_some() {
            return Err(HarnessError::Setup(format!("no grid on {stratum}")));
        }
        let dims = stratum.free_coords();
        Ok(GridSpec {
            n,
            stratum,
            per_axis,
            dims,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stratum(&self) -> &Stratum {
        &self.stratum
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn h(&self) -> f64 {
        1.0 / self.per_axis as f64
    }

    /// The free coordinates, one per grid axis.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// All multi-indices, the first axis varying slowest.
    pub fn nodes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::with_capacity(self.dims.len())];
        for _ in &self.dims {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..=self.per_axis).map(move |i| {
                        let mut next = prefix.clone();
                        next.push(i);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Nodes strictly inside the open stratum.
    pub fn interior_nodes(&self) -> Vec<Vec<usize>> {
        self.nodes()
            .into_iter()
            .filter(|ix| self.is_interior(ix))
            .collect()
    }

    pub fn is_interior(&self, ix: &[usize]) -> bool {
        if ix.iter().any(|&i| i == 0 || i == self.per_axis) {
            return false;
        }
        let simplex_mass: usize = self
            .dims
            .iter()
            .zip(ix)
            .filter(|(v, _)| self.stratum.simplex_coords().contains(v))
            .map(|(_, &i)| i)
            .sum();
        simplex_mass < self.per_axis || self.stratum.simplex().is_empty()
    }

    /// Exact coordinates `p^0..p^n` of a node; `p^0` and any eliminated
    /// reference coordinate are derived.
    pub fn exact_coords(&self, ix: &[usize]) -> Vec<BigRational> {
        let steps = BigInt::from(self.per_axis);
        let mut x = vec![BigRational::from_integer(BigInt::from(0)); self.n + 1];
        for (&v, &i) in self.dims.iter().zip(ix) {
            x[v] = BigRational::new(BigInt::from(i), steps.clone());
        }
        for (&v, &b) in self.stratum.fixed() {
            x[v] = BigRational::from_integer(BigInt::from(b));
        }
        fill_reference(&self.stratum, &mut x);
        x
    }

    pub fn coords(&self, ix: &[usize]) -> Vec<f64> {
        let h = self.h();
        let mut x = vec![0.0; self.n + 1];
        for (&v, &i) in self.dims.iter().zip(ix) {
            x[v] = i as f64 * h;
        }
        for (&v, &b) in self.stratum.fixed() {
            x[v] = b as f64;
        }
        if self.stratum.kind() != StratumKind::CubeFace {
            let reference = self.stratum.reference_vertex().unwrap_or(0);
            let rest: f64 = self.stratum.simplex_coords().iter().map(|&v| x[v]).sum();
            x[reference] = 1.0 - rest;
        }
        x
    }
}

/// Sets the barycentric coordinate of the simplex factor's reference vertex
/// from the others.
pub(crate) fn fill_reference(stratum: &Stratum, x: &mut [BigRational]) {
    if stratum.kind() == StratumKind::CubeFace {
        return;
    }
    let reference = stratum.reference_vertex().unwrap_or(0);
    let mut rest = BigRational::from_integer(BigInt::from(1));
    for &v in stratum.simplex_coords() {
        rest -= &x[v];
    }
    x[reference] = rest;
}
