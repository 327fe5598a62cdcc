use std::collections::BTreeMap;

use rayon::prelude::*;
use wfblow_algebra::{CompiledRational, RationalFunction};
use wfblow_geometry::{enumerate_faces, DomainKind, Stratum};
use wfblow_operators::{restrict_operator, OperatorKind, OperatorSpec};

use crate::{HarnessError, Result};

/// Target for `‖r‖₂ / ‖b‖₂` in each face solve.
pub const SOLVER_TOL: f64 = 1e-11;

const CHUNK: usize = 4096;

/// Stationary Dirichlet problem for a blown-up operator on the full cube,
/// posed through its values at the cube's vertices.
#[derive(Debug, Clone)]
pub struct DirichletProblem {
    operator: OperatorSpec,
    vertex_data: BTreeMap<Stratum, f64>,
}

impl DirichletProblem {
    pub fn new(operator: OperatorSpec, vertex_data: BTreeMap<Stratum, f64>) -> Result<Self> {
        let n = operator.n();
        let full = Stratum::cube_face(n, &(1..=n).collect::<Vec<_>>(), BTreeMap::new())?;
        if operator.kind() != OperatorKind::Transformed || operator.stratum() != &full {
            return Err(HarnessError::Setup(format!(
                "the cube solver needs a blown-up operator on the full cube, got {} on {}",
                operator.kind().as_str(),
                operator.stratum()
            )));
        }
        if operator.flips().iter().any(|&f| f) {
            return Err(HarnessError::Setup(
                "the cube solver needs an unflipped chain".into(),
            ));
        }
        let vertices = enumerate_faces(n, 0, DomainKind::Cube)?;
        for v in &vertices {
            match vertex_data.get(v) {
                Some(x) if x.is_finite() => {}
                Some(x) => return Err(HarnessError::Setup(format!("vertex value {x} at {v}"))),
                None => return Err(HarnessError::Setup(format!("no value at vertex {v}"))),
            }
        }
        if vertex_data.len() != vertices.len() {
            return Err(HarnessError::Setup(
                "vertex data names strata that are not cube vertices".into(),
            ));
        }
        Ok(DirichletProblem {
            operator,
            vertex_data,
        })
    }

    /// Vertex data from a function of the vertex's 0/1 coordinates `p^1..p^n`.
    pub fn from_vertex_fn(
        operator: OperatorSpec,
        mut value: impl FnMut(&[u8]) -> f64,
    ) -> Result<Self> {
        let n = operator.n();
        let data = enumerate_faces(n, 0, DomainKind::Cube)?
            .into_iter()
            .map(|v| {
                let bits: Vec<u8> = (1..=n).map(|i| v.fixed()[&i]).collect();
                let x = value(&bits);
                (v, x)
            })
            .collect();
        DirichletProblem::new(operator, data)
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.operator
    }

    pub fn vertex_data(&self) -> &BTreeMap<Stratum, f64> {
        &self.vertex_data
    }
}

/// Values on the full tensor grid of the cube; node `ix` has `p^v = ix[v-1]/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    n: usize,
    per_axis: usize,
    values: Vec<f64>,
}

impl GridFunction {
    fn new(n: usize, per_axis: usize) -> Self {
        GridFunction {
            n,
            per_axis,
            values: vec![f64::NAN; (per_axis + 1).pow(n as u32)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn stride(&self, v: usize) -> usize {
        (self.per_axis + 1).pow(v as u32 - 1)
    }

    pub fn index(&self, ix: &[usize]) -> usize {
        ix.iter()
            .enumerate()
            .map(|(i, &x)| x * self.stride(i + 1))
            .sum()
    }

    pub fn multi_index(&self, mut g: usize) -> Vec<usize> {
        (0..self.n)
            .map(|_| {
                let x = g % (self.per_axis + 1);
                g /= self.per_axis + 1;
                x
            })
            .collect()
    }

    pub fn get(&self, ix: &[usize]) -> f64 {
        self.values[self.index(ix)]
    }

    /// Coordinates `p^1..p^n` of node `g`.
    pub fn coords(&self, g: usize) -> Vec<f64> {
        let h = 1.0 / self.per_axis as f64;
        self.multi_index(g).iter().map(|&i| i as f64 * h).collect()
    }

    /// Largest `|value - exact|` over all nodes.
    pub fn max_deviation(&self, exact: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        (0..self.values.len())
            .into_par_iter()
            .map(|g| (self.values[g] - exact(&self.coords(g))).abs())
            .collect::<Vec<_>>()
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_csv(&self) -> String {
        let mut out: String = (1..=self.n).map(|v| format!("p{v},")).collect();
        out.push_str("u\n");
        for g in 0..self.values.len() {
            for x in self.coords(g) {
                out.push_str(&format!("{x},"));
            }
            out.push_str(&format!("{:e}\n", self.values[g]));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub grid: GridFunction,
    /// CG iterations summed over all face solves.
    pub iterations: usize,
    /// Largest relative residual `‖b - Ax‖₂ / ‖b‖₂` over the face solves.
    pub relative_residual: f64,
}

/// One Dirichlet solve on the open face `face`, reading boundary values from
/// and writing the solution into `values`.
struct FaceSystem {
    unknowns: Vec<usize>,
    diag: Vec<f64>,
    /// `2 d` neighbour slots per unknown: local index (or `usize::MAX` for a
    /// boundary node) and coupling weight.
    neighbours: Vec<(usize, f64)>,
    rhs: Vec<f64>,
    width: usize,
}

fn check_symmetrizable(spec: &OperatorSpec) -> Result<Vec<(usize, CompiledRational)>> {
    let mut out = Vec::new();
    for (&(i, j), a) in spec.entries() {
        if i != j {
            return Err(HarnessError::Setup(format!(
                "the cube solver needs a diagonal operator, found a{i}{j}"
            )));
        }
        let x = RationalFunction::var(i);
        let weight = &x * &(&RationalFunction::one() - &x);
        if (a / &weight).vars().contains(&i) {
            return Err(HarnessError::Setup(format!(
                "coefficient a{i}{i} = {a} is not p{i}(1 - p{i}) times a function of the other coordinates"
            )));
        }
        out.push((i as usize, CompiledRational::new(a)));
    }
    Ok(out)
}

fn assemble(
    spec: &OperatorSpec,
    face: &Stratum,
    grid: &GridFunction,
    forcing: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<FaceSystem> {
    let n = grid.n;
    let per = grid.per_axis;
    let h = 1.0 / per as f64;
    let free = face.cube().to_vec();
    let coefficients = check_symmetrizable(spec)?;
    let inner = per - 1;
    let count = inner.pow(free.len() as u32);
    let mut base = vec![0usize; n];
    for (&v, &b) in face.fixed() {
        base[v - 1] = b as usize * per;
    }
    let width = 2 * coefficients.len();
    let rows: Vec<(usize, f64, Vec<(usize, f64)>, f64)> = (0..count)
        .into_par_iter()
        .map(|local| {
            let mut ix = base.clone();
            let mut rest = local;
            let mut pos = vec![0usize; n + 1];
            for &v in &free {
                let k = rest % inner + 1;
                rest /= inner;
                ix[v - 1] = k;
                pos[v] = k;
            }
            let g = grid.index(&ix);
            let mut x = vec![0.0; n + 1];
            for v in 1..=n {
                x[v] = ix[v - 1] as f64 * h;
            }
            let scale: f64 = free.iter().map(|&v| 1.0 / (x[v] * (1.0 - x[v]))).product();
            let mut diag = 0.0;
            let mut slots = Vec::with_capacity(width);
            let mut rhs = -scale * forcing(&x[1..]);
            for (v, a) in &coefficients {
                let c = 0.5 * a.eval(&x).unwrap_or(f64::NAN) * scale / (h * h);
                diag += 2.0 * c;
                let stride = grid.stride(*v);
                let local_stride = inner.pow(free.iter().position(|w| w == v).unwrap() as u32);
                for (neighbour, at_edge, local_nb) in [
                    (g - stride, pos[*v] == 1, local.wrapping_sub(local_stride)),
                    (g + stride, pos[*v] == inner, local + local_stride),
                ] {
                    if at_edge {
                        rhs += c * grid.values[neighbour];
                        slots.push((usize::MAX, 0.0));
                    } else {
                        slots.push((local_nb, c));
                    }
                }
            }
            (g, diag, slots, rhs)
        })
        .collect();
    let mut system = FaceSystem {
        unknowns: Vec::with_capacity(count),
        diag: Vec::with_capacity(count),
        neighbours: Vec::with_capacity(count * width),
        rhs: Vec::with_capacity(count),
        width,
    };
    for (g, diag, slots, rhs) in rows {
        if !diag.is_finite() || diag <= 0.0 || !rhs.is_finite() {
            return Err(HarnessError::Setup(format!(
                "degenerate or non-finite row at node {:?} of {face}",
                grid.multi_index(g)
            )));
        }
        system.unknowns.push(g);
        system.diag.push(diag);
        system.neighbours.extend(slots);
        system.rhs.push(rhs);
    }
    Ok(system)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

impl FaceSystem {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let mut acc = self.diag[i] * x[i];
            for &(j, c) in &self.neighbours[i * self.width..(i + 1) * self.width] {
                if j != usize::MAX {
                    acc -= c * x[j];
                }
            }
            *yi = acc;
        });
    }

    /// Jacobi-preconditioned conjugate gradients from a zero start.
    fn solve(&self) -> Result<(Vec<f64>, usize, f64)> {
        let m = self.rhs.len();
        let b_norm = dot(&self.rhs, &self.rhs).sqrt();
        let mut x = vec![0.0; m];
        if b_norm == 0.0 {
            return Ok((x, 0, 0.0));
        }
        let mut r = self.rhs.clone();
        let mut z: Vec<f64> = r.iter().zip(&self.diag).map(|(ri, d)| ri / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; m];
        let limit = 50 * m + 1000;
        for iteration in 1..=limit {
            self.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            x.par_iter_mut()
                .zip(&p)
                .for_each(|(xi, pi)| *xi += alpha * pi);
            r.par_iter_mut()
                .zip(&ap)
                .for_each(|(ri, api)| *ri -= alpha * api);
            if dot(&r, &r).sqrt() <= SOLVER_TOL * b_norm {
                let mut ax = vec![0.0; m];
                self.apply(&x, &mut ax);
                let true_r: Vec<f64> = self.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                let rel = dot(&true_r, &true_r).sqrt() / b_norm;
                if rel <= 10.0 * SOLVER_TOL {
                    return Ok((x, iteration, rel));
                }
                r = true_r;
            }
            z.par_iter_mut()
                .zip(&r)
                .zip(&self.diag)
                .for_each(|((zi, ri), d)| *zi = ri / d);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            p.par_iter_mut()
                .zip(&z)
                .for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
        Err(HarnessError::Solver {
            achieved: dot(&r, &r).sqrt() / b_norm,
            iterations: limit,
        })
    }
}

fn solve_face(
    spec: &OperatorSpec,
    face: &Stratum,
    grid: &mut GridFunction,
    forcing: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<(usize, f64)> {
    let system = assemble(spec, face, grid, forcing)?;
    let (x, iterations, residual) = system.solve()?;
    for (g, value) in system.unknowns.iter().zip(x) {
        grid.values[*g] = value;
    }
    Ok((iterations, residual))
}

fn vertex_index(grid: &GridFunction, vertex: &Stratum) -> usize {
    let ix: Vec<usize> = (1..=grid.n)
        .map(|v| vertex.fixed()[&v] as usize * grid.per_axis)
        .collect();
    grid.index(&ix)
}

/// Face-by-face solve: vertices take their data, then every face of
/// dimension `1..=n` is solved for the restricted operator with the values
/// already found on its boundary.
pub fn solve_dirichlet_cube(problem: &DirichletProblem, per_axis: usize) -> Result<SolveReport> {
    if per_axis < 4 {
        return Err(HarnessError::Setup(format!(
            "grid needs N >= 4, got {per_axis}"
        )));
    }
    let n = problem.operator.n();
    let mut grid = GridFunction::new(n, per_axis);
    for (vertex, value) in &problem.vertex_data {
        let g = vertex_index(&grid, vertex);
        grid.values[g] = *value;
    }
    let mut iterations = 0;
    let mut relative_residual: f64 = 0.0;
    for d in 1..=n {
        for face in enumerate_faces(n, d, DomainKind::Cube)? {
            let spec = restrict_operator(&problem.operator, &face)?;
            let (its, res) = solve_face(&spec, &face, &mut grid, &|_| 0.0)?;
            iterations += its;
            relative_residual = relative_residual.max(res);
        }
    }
    Ok(SolveReport {
        grid,
        iterations,
        relative_residual,
    })
}

/// Solve of `½ Σ a^{jj} ∂_j² u = forcing` in the open cube with `u =
/// boundary` on the whole boundary.
pub fn solve_cube_interior(
    operator: &OperatorSpec,
    per_axis: usize,
    boundary: &(dyn Fn(&[f64]) -> f64 + Sync),
    forcing: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<SolveReport> {
    let n = operator.n();
    let full = Stratum::cube_face(n, &(1..=n).collect::<Vec<_>>(), BTreeMap::new())?;
    if operator.stratum() != &full {
        return Err(HarnessError::Setup(format!(
            "operator lives on {}",
            operator.stratum()
        )));
    }
    let mut grid = GridFunction::new(n, per_axis);
    for g in 0..grid.values.len() {
        let ix = grid.multi_index(g);
        if ix.iter().any(|&i| i == 0 || i == per_axis) {
            grid.values[g] = boundary(&grid.coords(g));
        }
    }
    let (iterations, relative_residual) = solve_face(operator, &full, &mut grid, forcing)?;
    Ok(SolveReport {
        grid,
        iterations,
        relative_residual,
    })
}
