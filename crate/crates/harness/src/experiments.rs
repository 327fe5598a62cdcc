use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wfblow_algebra::{rational_from_f64, CompiledRational, RationalFunction, StratifiedFunction};
use wfblow_blowup::{make_chain, transform_extension};
use wfblow_extension::{directional_limit, extend_along_path, vertex_constant, ExtensionResult};
use wfblow_geometry::{enumerate_faces, DomainKind, OrderedPath, Point, Stratum};
use wfblow_operators::OperatorSpec;

use crate::solve::{solve_cube_interior, solve_dirichlet_cube, DirichletProblem};
use crate::{HarnessError, Result};

fn constant(c: f64) -> Result<RationalFunction> {
    rational_from_f64(c)
        .map(RationalFunction::constant)
        .ok_or_else(|| HarnessError::Setup(format!("value {c} is not finite")))
}

fn full_cube(n: usize) -> Result<Stratum> {
    Ok(Stratum::cube_face(
        n,
        &(1..=n).collect::<Vec<_>>(),
        Default::default(),
    )?)
}

fn check_vertex_path(path: &OrderedPath) -> Result<()> {
    if path.base_dim() != 0 {
        return Err(HarnessError::Setup(format!(
            "path {path} does not start at a vertex"
        )));
    }
    Ok(())
}

/// Extension of the constant `c` at the first path vertex, carried to the cube.
pub fn transformed_vertex_solution(
    c: f64,
    path: &OrderedPath,
) -> Result<(ExtensionResult, StratifiedFunction)> {
    check_vertex_path(path)?;
    let base = vertex_constant(path.n(), path.at(0), constant(c)?)?;
    let ext = extend_along_path(&base, path)?;
    let transformed = transform_extension(&ext, &[])?;
    Ok((ext, transformed))
}

/// Least-squares slope of `log dev` against `log h`; `None` when any
/// deviation is not positive.
pub fn fitted_order(rows: &[(usize, f64)]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|&(_, d)| !(d > 0.0) || !d.is_finite()) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(n, d)| ((1.0 / n as f64).ln(), d.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridDeviation {
    pub per_axis: usize,
    pub max_deviation: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub path: Vec<usize>,
    pub n: usize,
    pub base_value: f64,
    /// Amount added to the origin vertex value before solving.
    pub perturbation: f64,
    pub grids: Vec<GridDeviation>,
    /// Empirical order across the grids; `None` when the deviations are 0.
    pub order: Option<f64>,
}

impl UniquenessReport {
    pub fn max_deviation(&self) -> f64 {
        self.grids
            .iter()
            .map(|g| g.max_deviation)
            .fold(0.0, f64::max)
    }
}

/// Vertex data of the transformed extension of `base_value`, optionally with
/// `perturbation` added at the origin, solved face by face on each grid and
/// compared with the closed-form transformed solution.
pub fn uniqueness(
    base_value: f64,
    path: &OrderedPath,
    grids: &[usize],
    perturbation: f64,
) -> Result<UniquenessReport> {
    let n = path.n();
    let (_, transformed) = transformed_vertex_solution(base_value, path)?;
    let closed =
        CompiledRational::new(transformed.get(&full_cube(n)?).ok_or_else(|| {
            HarnessError::Setup("transformed solution has no interior piece".into())
        })?);
    let mut vertex_data = std::collections::BTreeMap::new();
    for vertex in enumerate_faces(n, 0, DomainKind::Cube)? {
        let piece = transformed.get(&vertex).ok_or_else(|| {
            HarnessError::Setup(format!("transformed solution has no value at {vertex}"))
        })?;
        let mut value = piece.eval_with(&|_| 0.0)?;
        if vertex.fixed().values().all(|&b| b == 0) {
            value += perturbation;
        }
        vertex_data.insert(vertex, value);
    }
    let operator = OperatorSpec::transformed(path, &[])?;
    let problem = DirichletProblem::new(operator, vertex_data)?;
    let mut rows = Vec::new();
    for &per_axis in grids {
        let solved = solve_dirichlet_cube(&problem, per_axis)?;
        let max_deviation = solved.grid.max_deviation(|x| {
            let mut full = vec![0.0; n + 1];
            full[1..].copy_from_slice(x);
            closed.eval(&full).unwrap_or(f64::NAN)
        });
        rows.push(GridDeviation {
            per_axis,
            max_deviation,
            iterations: solved.iterations,
            relative_residual: solved.relative_residual,
        });
    }
    let order = fitted_order(
        &rows
            .iter()
            .map(|r| (r.per_axis, r.max_deviation))
            .collect::<Vec<_>>(),
    );
    Ok(UniquenessReport {
        path: path.indices().to_vec(),
        n,
        base_value,
        perturbation,
        grids: rows,
        order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxPrincipleReport {
    pub n: usize,
    pub per_axis: usize,
    pub trials: usize,
    pub violations: usize,
    /// Largest amount by which a node value left `[min, max]` of the vertex data.
    pub worst_excess: f64,
}

/// Tolerance for a node value exceeding the range of the vertex data.
pub const MAX_PRINCIPLE_SLACK: f64 = 1e-10;

/// Solves from `trials` random vertex vectors in `[-1, 1]` and checks that
/// every node lies within the range of the vertex values.
pub fn max_principle(
    path: &OrderedPath,
    per_axis: usize,
    trials: usize,
    seed: u64,
) -> Result<MaxPrincipleReport> {
    check_vertex_path(path)?;
    let operator = OperatorSpec::transformed(path, &[])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut worst_excess: f64 = 0.0;
    for _ in 0..trials {
        let problem =
            DirichletProblem::from_vertex_fn(operator.clone(), |_| rng.gen_range(-1.0..=1.0))?;
        let (lo, hi) = problem
            .vertex_data()
            .values()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let solved = solve_dirichlet_cube(&problem, per_axis)?;
        let excess = (solved.grid.max() - hi)
            .max(lo - solved.grid.min())
            .max(0.0);
        if excess > MAX_PRINCIPLE_SLACK || excess.is_nan() {
            violations += 1;
        }
        worst_excess = worst_excess.max(excess);
    }
    Ok(MaxPrincipleReport {
        n: path.n(),
        per_axis,
        trials,
        violations,
        worst_excess,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n: usize,
    pub weights: Vec<f64>,
    pub grids: Vec<GridDeviation>,
    pub order: Option<f64>,
}

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,max_dev,fitted_order\n");
        let order = self
            .order
            .map_or_else(|| "nan".to_string(), |o| format!("{o}"));
        for g in &self.grids {
            out.push_str(&format!("{},{:e},{order}\n", g.per_axis, g.max_deviation));
        }
        out
    }
}

/// Manufactured solution `u = exp(Σ w_j p̃^j)` for the blown-up operator,
/// with forcing `½ Σ a^{jj} w_j² u`, solved in the open cube with exact
/// boundary values; reports the deviation per grid and the fitted order.
pub fn convergence_study(path: &OrderedPath, grids: &[usize]) -> Result<ConvergenceReport> {
    check_vertex_path(path)?;
    let n = path.n();
    let operator = OperatorSpec::transformed(path, &[])?;
    let weights: Vec<f64> = (1..=n).map(|j| 0.5 + 0.25 * j as f64).collect();
    let coefficients: Vec<(usize, CompiledRational)> = operator
        .entries()
        .map(|(&(i, _), a)| (i as usize, CompiledRational::new(a)))
        .collect();
    let exact = |x: &[f64]| {
        x.iter()
            .zip(&weights)
            .map(|(a, w)| a * w)
            .sum::<f64>()
            .exp()
    };
    let forcing = |x: &[f64]| {
        let mut full = vec![0.0; n + 1];
        full[1..].copy_from_slice(x);
        let u = exact(x);
        coefficients
            .iter()
            .map(|(j, a)| {
                0.5 * a.eval(&full).unwrap_or(f64::NAN) * weights[j - 1] * weights[j - 1] * u
            })
            .sum()
    };
    let mut rows = Vec::new();
    for &per_axis in grids {
        let solved = solve_cube_interior(&operator, per_axis, &exact, &forcing)?;
        rows.push(GridDeviation {
            per_axis,
            max_deviation: solved.grid.max_deviation(exact),
            iterations: solved.iterations,
            relative_residual: solved.relative_residual,
        });
    }
    let order = fitted_order(
        &rows
            .iter()
            .map(|r| (r.per_axis, r.max_deviation))
            .collect::<Vec<_>>(),
    );
    Ok(ConvergenceReport {
        n,
        weights,
        grids: rows,
        order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaySample {
    pub direction: String,
    pub t: f64,
    pub p1: f64,
    pub p2: f64,
    pub extension: f64,
    pub q1: f64,
    pub q2: f64,
    pub transformed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncompatibilityReport {
    pub c: f64,
    /// `(direction, limit of ū^{0,1,2}, expected limit)`.
    pub limits: Vec<(String, f64, f64)>,
    pub max_limit_error: f64,
    pub samples: Vec<RaySample>,
    /// Largest jump of Ũ between neighbouring nodes of the dense grid.
    pub max_jump: f64,
    /// `2 L / M` with `L = n |c|` and `M` cells per axis.
    pub jump_bound: f64,
}

impl IncompatibilityReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("direction,t,p1,p2,extension,q1,q2,transformed\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{:e},{},{},{:e}\n",
                s.direction, s.t, s.p1, s.p2, s.extension, s.q1, s.q2, s.transformed
            ));
        }
        out
    }
}

/// Cells per axis of the dense continuity grid.
pub const CONTINUITY_CELLS: usize = 400;

/// Rays into the origin vertex of the triangle along `(1,0)`, `(0,1)` and
/// `(1,1)` for the extension of `c` along `(0,1,2)`: the extension has the
/// limits `c`, `0`, `c/2`, while its blow-up is continuous on the closed square.
pub fn incompatibility_samples(c: f64) -> Result<IncompatibilityReport> {
    let path = OrderedPath::new(vec![0, 1, 2], 2)?;
    let (ext, transformed) = transformed_vertex_solution(c, &path)?;
    let chain = make_chain(&path, 2, &[])?;
    let top = ext.piece(2).clone();
    let compiled_top = CompiledRational::new(&top);
    let cube =
        CompiledRational::new(transformed.get(&full_cube(2)?).ok_or_else(|| {
            HarnessError::Setup("transformed solution has no interior piece".into())
        })?);
    let directions = [
        ("(1,0)", [1.0, 0.0], c),
        ("(0,1)", [0.0, 1.0], 0.0),
        ("(1,1)", [0.5, 0.5], c / 2.0),
    ];
    let origin = [1.0, 0.0, 0.0];
    let mut limits = Vec::new();
    let mut samples = Vec::new();
    let mut max_limit_error: f64 = 0.0;
    for (name, dir, expected) in directions {
        let target = [1.0 - dir[0] - dir[1], dir[0], dir[1]];
        let limit = directional_limit(&top, &origin, &target, &[])?;
        max_limit_error = max_limit_error.max((limit - expected).abs());
        limits.push((name.to_string(), limit, expected));
        for e in 1..=8 {
            let t = 10f64.powi(-e);
            let (p1, p2) = (t * dir[0], t * dir[1]);
            let q = chain.apply(&Point::new(vec![p1, p2])?)?;
            samples.push(RaySample {
                direction: name.to_string(),
                t,
                p1,
                p2,
                extension: compiled_top.eval(&[1.0 - p1 - p2, p1, p2])?,
                q1: q.get(1),
                q2: q.get(2),
                transformed: cube.eval(&[0.0, q.get(1), q.get(2)])?,
            });
        }
    }
    let m = CONTINUITY_CELLS;
    let values: Vec<f64> = (0..=m)
        .flat_map(|i| (0..=m).map(move |j| (i, j)))
        .map(|(i, j)| cube.eval(&[0.0, i as f64 / m as f64, j as f64 / m as f64]))
        .collect::<std::result::Result<_, _>>()?;
    let at = |i: usize, j: usize| values[i * (m + 1) + j];
    let mut max_jump: f64 = 0.0;
    for i in 0..=m {
        for j in 0..=m {
            if i < m {
                max_jump = max_jump.max((at(i + 1, j) - at(i, j)).abs());
            }
            if j < m {
                max_jump = max_jump.max((at(i, j + 1) - at(i, j)).abs());
            }
        }
    }
    Ok(IncompatibilityReport {
        c,
        limits,
        max_limit_error,
        samples,
        max_jump,
        jump_bound: 2.0 * 2.0 * c.abs() / m as f64,
    })
}
