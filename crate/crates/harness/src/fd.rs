use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use wfblow_algebra::{is_param, rational_from_f64, RationalFunction, StratifiedFunction, Var};
use wfblow_operators::OperatorSpec;

use crate::grid::{fill_reference, GridSpec};
use crate::{HarnessError, Result};

/// Stencil step as a fraction of the grid spacing. Values are computed in
/// exact arithmetic, so the step only controls truncation error.
pub const FD_STEP_DIVISOR: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct FdRow {
    pub coords: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    pub max_residual: f64,
    pub nodes: usize,
    /// Nodes where the function or a coefficient has a pole.
    pub skipped: usize,
    pub rows: Vec<FdRow>,
}

impl FdReport {
    /// One line per evaluated node: the grid coordinates, then the residual.
    pub fn to_csv(&self, dims: &[usize]) -> String {
        let mut out: String = dims.iter().map(|v| format!("p{v},")).collect();
        out.push_str("residual\n");
        for row in &self.rows {
            for x in &row.coords {
                out.push_str(&format!("{x},"));
            }
            out.push_str(&format!("{:e}\n", row.residual));
        }
        out
    }
}

type Values = BTreeMap<Var, BigRational>;

fn eval(f: &RationalFunction, x: &[BigRational], params: &Values) -> Option<BigRational> {
    f.eval_exact(&|v| {
        if is_param(v) {
            params.get(&v).cloned().unwrap_or_else(BigRational::zero)
        } else {
            x.get(v as usize).cloned().unwrap_or_else(BigRational::zero)
        }
    })
    .ok()
}

/// Centered second difference of `piece` at `x` in the coordinates `i`, `j`.
fn second_difference(
    piece: &RationalFunction,
    grid: &GridSpec,
    x: &[BigRational],
    f0: &BigRational,
    (i, j): (usize, usize),
    delta: &BigRational,
    params: &Values,
) -> Option<BigRational> {
    let at = |moves: &[(usize, i64)]| {
        let mut y = x.to_vec();
        for &(v, sign) in moves {
            y[v] += delta * BigRational::from_integer(BigInt::from(sign));
        }
        fill_reference(grid.stratum(), &mut y);
        eval(piece, &y, params)
    };
    let int = |k: i64| BigRational::from_integer(BigInt::from(k));
    let d2 = delta * delta;
    if i == j {
        Some((at(&[(i, 1)])? - int(2) * f0 + at(&[(i, -1)])?) / d2)
    } else {
        let sum = at(&[(i, 1), (j, 1)])? - at(&[(i, 1), (j, -1)])? - at(&[(i, -1), (j, 1)])?
            + at(&[(i, -1), (j, -1)])?;
        Some(sum / (int(4) * d2))
    }
}

/// Largest `|½ Σ a^{ij} D_i D_j u + λ u|` over the interior nodes of `grid`,
/// with `u` the piece of `u` on the operator's stratum and the derivatives
/// replaced by centered differences.
pub fn fd_residual(
    u: &StratifiedFunction,
    spec: &OperatorSpec,
    grid: &GridSpec,
    params: &[(Var, f64)],
) -> Result<FdReport> {
    if grid.stratum() != spec.stratum() {
        return Err(HarnessError::Setup(format!(
            "grid lives on {} but the operator on {}",
            grid.stratum(),
            spec.stratum()
        )));
    }
    let piece = u
        .get(spec.stratum())
        .ok_or_else(|| HarnessError::Setup(format!("no piece on {}", spec.stratum())))?;
    let params: Values = params
        .iter()
        .map(|&(v, x)| {
            rational_from_f64(x)
                .map(|r| (v, r))
                .ok_or_else(|| HarnessError::Setup(format!("parameter value {x} is not finite")))
        })
        .collect::<Result<_>>()?;
    let lambda = u.time_factor().clone();
    let delta = BigRational::new(
        BigInt::from(1),
        BigInt::from(grid.per_axis() as u64 * FD_STEP_DIVISOR),
    );
    let entries: Vec<((usize, usize), RationalFunction)> = spec
        .entries()
        .map(|(&(i, j), a)| ((i as usize, j as usize), a.clone()))
        .collect();
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let nodes = grid.interior_nodes();
    let results: Vec<Option<FdRow>> = nodes
        .par_iter()
        .map(|ix| {
            let x = grid.exact_coords(ix);
            let f0 = eval(piece, &x, &params)?;
            let mut total = &lambda * &f0;
            for ((i, j), a) in &entries {
                let coeff = eval(a, &x, &params)?;
                let d = second_difference(piece, grid, &x, &f0, (*i, *j), &delta, &params)?;
                let weight = if i == j {
                    half.clone()
                } else {
                    BigRational::from_integer(BigInt::from(1))
                };
                total += weight * coeff * d;
            }
            Some(FdRow {
                coords: grid
                    .dims()
                    .iter()
                    .map(|&v| x[v].to_f64().unwrap_or(f64::NAN))
                    .collect(),
                residual: total.to_f64().unwrap_or(f64::INFINITY).abs(),
            })
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let rows: Vec<FdRow> = results.into_iter().flatten().collect();
    let max_residual = rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(FdReport {
        max_residual,
        nodes: nodes.len(),
        skipped,
        rows,
    })
}
