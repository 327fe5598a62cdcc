use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfblow_algebra::{param, RationalFunction, Var};
use wfblow_blowup::{
    make_chain, map_face, map_face_inverse, pullback_defect, transform_solution, BlowupChain,
};
use wfblow_extension::{
    affine, check_extension_constraints, eigen_product, extend_along_path, vertex_constant,
    BaseSolution, ExtensionResult,
};
use wfblow_geometry::{subsets, OrderedPath, Point, Stratum};
use wfblow_operators::OperatorSpec;

use crate::experiments::{convergence_study, incompatibility_samples, max_principle, uniqueness};
use crate::fd::fd_residual;
use crate::grid::GridSpec;
use crate::report::{Case, SuiteReport};
use crate::stem::{check_stem_lemma, STEM_TOL};
use crate::{HarnessError, Result};

/// Bound for numeric roundtrips and pointwise agreements.
pub const POINT_TOL: f64 = 1e-12;
/// Bound for finite-difference residuals of exact solutions.
pub const FD_TOL: f64 = 1e-8;
/// Bound for solver deviations from the closed form.
pub const SOLVE_TOL: f64 = 1e-8;
/// Smallest accepted manufactured-solution convergence order.
pub const MIN_ORDER: f64 = 1.8;
/// Bound for the directional limits into the origin vertex.
pub const LIMIT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Roundtrip,
    Operator,
    Extension,
    Transform,
    Faces,
    Stem,
    Uniqueness,
    Incompatibility,
    All,
}

impl Suite {
    pub const EACH: [Suite; 8] = [
        Suite::Roundtrip,
        Suite::Operator,
        Suite::Extension,
        Suite::Transform,
        Suite::Faces,
        Suite::Stem,
        Suite::Uniqueness,
        Suite::Incompatibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Roundtrip => "roundtrip",
            Suite::Operator => "operator",
            Suite::Extension => "extension",
            Suite::Transform => "transform",
            Suite::Faces => "faces",
            Suite::Stem => "stem",
            Suite::Uniqueness => "uniqueness",
            Suite::Incompatibility => "incompatibility",
            Suite::All => "all",
        }
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .into_iter()
            .chain([Suite::All])
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| HarnessError::Setup(format!("unknown suite {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOptions {
    pub path: OrderedPath,
    pub seed: u64,
    /// Value of the parameter `c` in the vertex-constant base.
    pub c: f64,
    /// Random points for numeric roundtrips and pointwise agreement.
    pub points: usize,
    pub fd_grid: usize,
    pub stem_grid: usize,
    pub solve_grids: Vec<usize>,
    pub convergence_grids: Vec<usize>,
    pub max_principle_trials: usize,
    pub max_principle_grid: usize,
    /// Factor applied to every metric tolerance after the checks ran.
    pub tolerance_scale: f64,
}

impl SuiteOptions {
    pub fn new(path: OrderedPath, seed: u64) -> Self {
        SuiteOptions {
            path,
            seed,
            c: 1.0,
            points: 10_000,
            fd_grid: 32,
            stem_grid: 8,
            solve_grids: vec![16, 32],
            convergence_grids: vec![16, 32, 64],
            max_principle_trials: 20,
            max_principle_grid: 8,
            tolerance_scale: 1.0,
        }
    }

    fn n(&self) -> usize {
        self.path.n()
    }

    fn params(&self) -> Vec<(Var, f64)> {
        vec![(param('c'), self.c)]
    }
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// A certified base solution on the path's base face: the constant `c` on a
/// vertex, `2 - 3 p^v` on an edge, `e^t p^i p^j` on larger faces.
pub fn catalog_base(path: &OrderedPath) -> Result<BaseSolution> {
    let n = path.n();
    let face = path.face_vertices(path.base_dim());
    Ok(match face.len() {
        1 => vertex_constant(n, face[0], RationalFunction::var(param('c')))?,
        2 => affine(n, &face, int(2), &[(face[1], int(-3))])?,
        m => eigen_product(n, &face, face[m - 2], face[m - 1])?,
    })
}

fn interior_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Result<Point> {
    let w: Vec<f64> = (0..=n).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let total: f64 = w.iter().sum();
    Ok(Point::new(w[1..].iter().map(|x| x / total).collect())?)
}

/// Runs `check` and turns an error into a failing case.
fn guarded(report: &mut SuiteReport, name: &str, check: impl FnOnce() -> Result<Vec<Case>>) {
    match check() {
        Ok(cases) => report.cases.extend(cases),
        Err(e) => report.push(Case::error(name, e)),
    }
}

fn chain(options: &SuiteOptions) -> Result<BlowupChain> {
    Ok(make_chain(&options.path, options.n(), &[])?)
}

fn roundtrip(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Roundtrip.as_str());
    guarded(&mut report, "roundtrip", || {
        let chain = chain(options)?;
        let mut symbolic_failures = 0;
        for (v, g) in chain.inverse() {
            let back = g.substitute(chain.forward())?;
            if !(&back - &RationalFunction::var(*v)).is_identically_zero() {
                symbolic_failures += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let mut worst: f64 = 0.0;
        for _ in 0..options.points {
            let p = interior_simplex_point(&mut rng, options.n())?;
            let back = chain.apply_inverse(&chain.apply(&p)?)?;
            worst = worst.max(back.max_abs_diff(&p));
        }
        let closed = chain
            .closed_forward()
            .iter()
            .all(|(v, f)| chain.forward()[v].equals(f))
            && chain
                .closed_inverse()
                .iter()
                .all(|(v, f)| chain.inverse()[v].equals(f));
        Ok(vec![
            Case::at_most(
                "inverse after forward is the identity symbolically",
                symbolic_failures as f64,
                0.0,
            ),
            Case::at_most(
                format!("numeric roundtrip over {} points", options.points),
                worst,
                POINT_TOL,
            ),
            Case::new("composed maps equal the closed forms", closed, 0.0, 0.0),
        ])
    });
    report
}

/// Monomials in `p^1..p^n` of degree at most `degree`.
pub fn monomials(n: usize, degree: usize) -> Vec<RationalFunction> {
    let mut out = vec![RationalFunction::one()];
    let mut layer = vec![(RationalFunction::one(), 1usize)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (m, lowest) in &layer {
            for v in *lowest..=n {
                next.push((m * &RationalFunction::var(v as Var), v));
            }
        }
        out.extend(next.iter().map(|(m, _)| m.clone()));
        layer = next;
    }
    out
}

fn operator(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Operator.as_str());
    guarded(&mut report, "operator", || {
        let chain = chain(options)?;
        let basis = monomials(options.n(), 3);
        let failures = basis
            .iter()
            .map(|f| pullback_defect(&chain, f).map(|d| !d.is_identically_zero()))
            .collect::<std::result::Result<Vec<bool>, _>>()?
            .into_iter()
            .filter(|&bad| bad)
            .count();
        let spec = OperatorSpec::transformed(&options.path, &[])?;
        let block = spec.stratum().simplex_coords().to_vec();
        let mixed_outside_block = spec
            .entries()
            .filter(|(&(i, j), _)| {
                i != j && !(block.contains(&(i as usize)) && block.contains(&(j as usize)))
            })
            .count();
        Ok(vec![
            Case::at_most(
                format!(
                    "pullback defect vanishes on {} monomials of degree <= 3",
                    basis.len()
                ),
                failures as f64,
                0.0,
            ),
            Case::at_most(
                "blown-up operator is diagonal in the cube coordinates",
                mixed_outside_block as f64,
                0.0,
            ),
        ])
    });
    report
}

fn extension_result(options: &SuiteOptions) -> Result<ExtensionResult> {
    Ok(extend_along_path(
        &catalog_base(&options.path)?,
        &options.path,
    )?)
}

fn extension(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Extension.as_str());
    guarded(&mut report, "extension", || {
        let n = options.n();
        let ext = extension_result(options)?;
        let constraints = check_extension_constraints(
            ext.pieces(),
            &options.path,
            8,
            options.seed,
            &options.params(),
        )?;
        let mut cases = Vec::new();
        let residual_failures = constraints
            .entries
            .iter()
            .filter(|e| e.kind == wfblow_extension::ConstraintKind::Residual && !e.passed)
            .count();
        cases.push(Case::at_most(
            "exact residual vanishes on every path face",
            residual_failures as f64,
            0.0,
        ));
        let boundary = constraints
            .entries
            .iter()
            .filter(|e| e.kind == wfblow_extension::ConstraintKind::Boundary)
            .map(|e| e.deviation)
            .fold(0.0, f64::max);
        cases.push(Case::at_most(
            "facet limits match the neighbouring pieces",
            boundary,
            wfblow_extension::EPS_BND,
        ));
        let k = options.path.base_dim();
        let loci = constraints.incompatibility_loci();
        let predicted: Vec<usize> = (k..n.saturating_sub(1)).collect();
        cases.push(Case::new(
            format!("direction dependent limits exactly at d in {predicted:?}"),
            loci == predicted,
            loci.len() as f64,
            predicted.len() as f64,
        ));
        for d in k.max(1)..=n {
            let face = Stratum::simplex_face(n, &options.path.face_vertices(d))?;
            let spec = OperatorSpec::simplex_on(n, face.simplex())?;
            let grid = GridSpec::new(n, face.clone(), options.fd_grid)?;
            let fd = fd_residual(ext.pieces(), &spec, &grid, &options.params())?;
            let metric = if fd.skipped > 0 {
                f64::INFINITY
            } else {
                fd.max_residual
            };
            cases.push(Case::at_most(
                format!(
                    "finite-difference residual on {face}, N = {}",
                    options.fd_grid
                ),
                metric,
                FD_TOL,
            ));
        }
        Ok(cases)
    });
    report
}

fn transform(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Transform.as_str());
    guarded(&mut report, "transform", || {
        let n = options.n();
        let chain = chain(options)?;
        let ext = extension_result(options)?;
        let transformed = transform_solution(&ext, &chain)?;
        let mut cases = vec![Case::new(
            "transformed pieces equal the pushforward on every path face",
            true,
            0.0,
            0.0,
        )];
        let top = Stratum::simplex_face(n, &options.path.face_vertices(n))?;
        let image = map_face(&chain, &top)?;
        let piece = transformed
            .get(&image)
            .ok_or_else(|| HarnessError::Setup(format!("no transformed piece on {image}")))?;
        if options.path.base_dim() == 0 {
            let mut product = RationalFunction::var(param('c'));
            for j in 2..=n {
                product = &product
                    * &(&RationalFunction::one()
                        - &RationalFunction::var(options.path.at(j) as Var));
            }
            let head = RationalFunction::var(options.path.at(1) as Var);
            product = &product * &(&RationalFunction::one() - &head);
            cases.push(Case::new(
                "vertex extension becomes c times the product of (1 - q)",
                piece.equals(&product),
                0.0,
                0.0,
            ));
        }
        let c = options.c;
        let value = |f: &RationalFunction, x: &Point| {
            f.eval_with(&|v| {
                if v == param('c') {
                    c
                } else if v == 0 {
                    f64::NAN
                } else {
                    x.get(v as usize)
                }
            })
        };
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0x5eed);
        let mut worst: f64 = 0.0;
        for _ in 0..options.points.min(2000) {
            let p = interior_simplex_point(&mut rng, n)?;
            let q = chain.apply(&p)?;
            worst = worst.max((value(ext.piece(n), &p)? - value(piece, &q)?).abs());
        }
        cases.push(Case::at_most(
            "transformed solution agrees with the extension pointwise",
            worst,
            1e3 * POINT_TOL,
        ));
        Ok(cases)
    });
    report
}

fn faces(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Faces.as_str());
    guarded(&mut report, "faces", || {
        let n = options.n();
        let chain = chain(options)?;
        let vertices: Vec<usize> = (0..=n).collect();
        let mut mismatches = 0;
        let mut count = 0;
        for size in 1..=(n + 1) {
            for set in subsets(&vertices, size) {
                let face = Stratum::simplex_face(n, &set)?;
                let image = map_face(&chain, &face)?;
                count += 1;
                if map_face_inverse(&chain, &image)? != face {
                    mismatches += 1;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed ^ 0xface);
        let k = options.path.base_dim();
        let mut worst: f64 = 0.0;
        for j in (k + 2)..=n {
            for _ in 0..200 {
                let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                if k > 0 {
                    let block: Vec<usize> = options
                        .path
                        .face_vertices(k + 1)
                        .into_iter()
                        .filter(|&v| v != 0)
                        .collect();
                    let scale = 1.0 / (block.len() as f64 + 1.0);
                    for v in block {
                        q[v - 1] *= scale;
                    }
                }
                q[options.path.at(j) - 1] = 1.0;
                let p = chain.apply_inverse(&Point::new(q)?)?;
                let lost = options.path.at(j - 1);
                worst = worst.max(p.barycentric(lost).abs());
            }
        }
        Ok(vec![
            Case::at_most(
                format!("{count} simplex faces map forward and back to themselves"),
                mismatches as f64,
                0.0,
            ),
            Case::at_most(
                "unit faces lie over a vanishing path coordinate",
                worst,
                POINT_TOL,
            ),
        ])
    });
    report
}

fn stem(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Stem.as_str());
    guarded(&mut report, "stem", || {
        let n = options.n();
        if options.path.base_dim() != 0 {
            return Err(HarnessError::Setup(format!(
                "path {} does not start at a vertex",
                options.path
            )));
        }
        let ext = extend_along_path(
            &vertex_constant(n, options.path.at(0), RationalFunction::from_int(1))?,
            &options.path,
        )?;
        let transformed = transform_solution(&ext, &chain(options)?)?;
        let stem = check_stem_lemma(&transformed, &options.path, n, options.stem_grid)?;
        let mut cases = Vec::new();
        for dim in 1..=n {
            let entries: Vec<_> = stem.entries.iter().filter(|e| e.dim == dim).collect();
            let worst = entries.iter().map(|e| e.residual).fold(0.0, f64::max);
            cases.push(Case::at_most(
                format!(
                    "restricted residual on {} faces of dimension {dim}",
                    entries.len()
                ),
                worst,
                STEM_TOL,
            ));
        }
        let disagreements = stem.entries.iter().filter(|e| !e.brute_force_ok).count();
        cases.push(Case::at_most(
            "index deletion rule matches the brute-force limits",
            disagreements as f64,
            0.0,
        ));
        Ok(cases)
    });
    report
}

fn uniqueness_suite(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Uniqueness.as_str());
    guarded(&mut report, "uniqueness", || {
        let path = &options.path;
        let mut cases = Vec::new();
        let exact = uniqueness(options.c, path, &options.solve_grids, 0.0)?;
        for g in &exact.grids {
            cases.push(Case::at_most(
                format!(
                    "solve from vertex data reproduces the closed form, N = {}",
                    g.per_axis
                ),
                g.max_deviation,
                SOLVE_TOL,
            ));
        }
        let grid = options.solve_grids.first().copied().unwrap_or(16);
        let perturbed = uniqueness(options.c, path, &[grid], 0.1)?;
        let shift = perturbed.max_deviation();
        cases.push(Case::at_most(
            "origin perturbation of 0.1 moves the solution by 0.1",
            (shift - 0.1).abs(),
            SOLVE_TOL,
        ));
        let mp = max_principle(
            path,
            options.max_principle_grid,
            options.max_principle_trials,
            options.seed,
        )?;
        cases.push(Case::at_most(
            format!(
                "discrete maximum principle on {} random vertex vectors",
                mp.trials
            ),
            mp.worst_excess,
            crate::experiments::MAX_PRINCIPLE_SLACK,
        ));
        let conv = convergence_study(path, &options.convergence_grids)?;
        cases.push(Case::at_least(
            format!(
                "manufactured solution converges, N = {:?}",
                options.convergence_grids
            ),
            conv.order.unwrap_or(f64::NAN),
            MIN_ORDER,
        ));
        Ok(cases)
    });
    report
}

fn incompatibility(options: &SuiteOptions) -> SuiteReport {
    let mut report = SuiteReport::new(Suite::Incompatibility.as_str());
    guarded(&mut report, "incompatibility", || {
        let sample = incompatibility_samples(options.c)?;
        Ok(vec![
            Case::at_most(
                "limits c, 0, c/2 along (1,0), (0,1), (1,1)",
                sample.max_limit_error,
                LIMIT_TOL,
            ),
            Case::new(
                "blown-up solution is continuous on the closed square",
                sample.max_jump <= sample.jump_bound,
                sample.max_jump,
                sample.jump_bound,
            ),
        ])
    });
    report
}

/// Runs one suite, or every suite in a fixed order for [`Suite::All`].
pub fn run_suite(suite: Suite, options: &SuiteOptions) -> Vec<SuiteReport> {
    let mut reports = run_unscaled(suite, options);
    if options.tolerance_scale != 1.0 {
        for case in reports.iter_mut().flat_map(|r| r.cases.iter_mut()) {
            case.rescale(options.tolerance_scale);
        }
    }
    reports
}

fn run_unscaled(suite: Suite, options: &SuiteOptions) -> Vec<SuiteReport> {
    match suite {
        Suite::All => Suite::EACH
            .iter()
            .flat_map(|&s| run_unscaled(s, options))
            .collect(),
        Suite::Roundtrip => vec![roundtrip(options)],
        Suite::Operator => vec![operator(options)],
        Suite::Extension => vec![extension(options)],
        Suite::Transform => vec![transform(options)],
        Suite::Faces => vec![faces(options)],
        Suite::Stem => vec![stem(options)],
        Suite::Uniqueness => vec![uniqueness_suite(options)],
        Suite::Incompatibility => vec![incompatibility(options)],
    }
}
