use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use wfblow_algebra::{param, parse_expr, RationalFunction, StratifiedFunction};
use wfblow_blowup::{make_chain, transform_solution};
use wfblow_extension::{eigen_product, extend_along_path, vertex_constant};
use wfblow_geometry::{enumerate_faces, DomainKind, OrderedPath, Stratum};
use wfblow_harness::{
    check_stem_lemma, convergence_study, fd_residual, incompatibility_samples, max_principle,
    run_suite, solve_cube_interior, solve_dirichlet_cube, uniqueness, CaseStatus, DirichletProblem,
    GridSpec, Suite, SuiteOptions,
};
use wfblow_operators::{restrict_operator, OperatorSpec};

fn path(ix: &[usize]) -> OrderedPath {
    OrderedPath::new(ix.to_vec(), ix.len() - 1).unwrap()
}

fn cube(n: usize) -> Stratum {
    Stratum::cube_face(n, &(1..=n).collect::<Vec<_>>(), BTreeMap::new()).unwrap()
}

fn cube_face(n: usize, fixed: &[(usize, u8)]) -> Stratum {
    let fixed: BTreeMap<usize, u8> = fixed.iter().copied().collect();
    let free: Vec<usize> = (1..=n).filter(|i| !fixed.contains_key(i)).collect();
    Stratum::cube_face(n, &free, fixed).unwrap()
}

fn single(stratum: Stratum, piece: &str, lambda: i64) -> StratifiedFunction {
    let mut u = StratifiedFunction::new(BigRational::from_integer(BigInt::from(lambda)));
    u.insert(stratum, parse_expr(piece).unwrap());
    u
}

#[test]
fn fd_oracle_on_the_eigen_solution() {
    let top = Stratum::simplex_face(2, &[0, 1, 2]).unwrap();
    let u = single(top.clone(), "p1*p2", 1);
    let grid = GridSpec::new(2, top, 32).unwrap();
    let report = fd_residual(&u, &OperatorSpec::simplex(2), &grid, &[]).unwrap();
    assert!(report.max_residual <= 1e-9, "{:e}", report.max_residual);
    assert_eq!(report.skipped, 0);
    assert_eq!(report.nodes, report.rows.len());
}

#[test]
fn fd_oracle_on_the_transformed_vertex_solution_and_a_control() {
    let spec = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
    let grid = GridSpec::new(2, cube(2), 32).unwrap();
    let c = param('c');
    let solution = single(cube(2), "c*(1-p1)*(1-p2)", 0);
    let report = fd_residual(&solution, &spec, &grid, &[(c, 1.7)]).unwrap();
    assert!(report.max_residual <= 1e-9, "{:e}", report.max_residual);
    let control = single(cube(2), "p1^2", 0);
    let report = fd_residual(&control, &spec, &grid, &[]).unwrap();
    assert!(
        (report.max_residual - 0.25).abs() < 1e-6,
        "{:e}",
        report.max_residual
    );
    let csv = report.to_csv(grid.dims());
    assert!(csv.starts_with("p1,p2,residual\n"));
    assert_eq!(csv.lines().count(), 31 * 31 + 1);
}

#[test]
fn fd_oracle_agrees_with_exact_certification() {
    for p in [path(&[0, 1, 2]), path(&[2, 0, 1]), path(&[1, 2, 0, 3])] {
        let n = p.n();
        let face = p.face_vertices(p.base_dim());
        let base = match face.len() {
            1 => vertex_constant(n, face[0], RationalFunction::from_int(3)).unwrap(),
            _ => eigen_product(n, &face, face[0].max(1), *face.last().unwrap()).unwrap_or_else(
                |_| vertex_constant(n, face[0], RationalFunction::from_int(3)).unwrap(),
            ),
        };
        let base = if base.vertices() == face.as_slice() {
            base
        } else {
            continue;
        };
        let ext = extend_along_path(&base, &p).unwrap();
        for d in p.base_dim().max(1)..=n {
            let stratum = Stratum::simplex_face(n, &p.face_vertices(d)).unwrap();
            let spec = OperatorSpec::simplex_on(n, stratum.simplex()).unwrap();
            let grid = GridSpec::new(n, stratum, 16).unwrap();
            let report = fd_residual(ext.pieces(), &spec, &grid, &[]).unwrap();
            assert!(
                report.max_residual <= 1e-8,
                "{p}, d = {d}: {:e}",
                report.max_residual
            );
        }
    }
}

#[test]
fn fd_oracle_rejects_mismatched_grid() {
    let spec = OperatorSpec::simplex(2);
    let grid = GridSpec::new(2, cube(2), 8).unwrap();
    let u = single(cube(2), "p1", 0);
    assert!(fd_residual(&u, &spec, &grid, &[]).is_err());
    assert!(GridSpec::new(2, cube(2), 3).is_err());
}

fn transformed_constant(p: &OrderedPath) -> StratifiedFunction {
    let base = vertex_constant(p.n(), p.at(0), RationalFunction::var(param('c'))).unwrap();
    let ext = extend_along_path(&base, p).unwrap();
    transform_solution(&ext, &make_chain(p, p.n(), &[]).unwrap()).unwrap()
}

#[test]
fn stem_lemma_holds_on_every_face() {
    for p in [
        path(&[0, 1, 2]),
        path(&[0, 1, 2, 3]),
        path(&[0, 2, 3, 1]),
        path(&[0, 1, 2, 3, 4]),
    ] {
        let n = p.n();
        let base = vertex_constant(n, p.at(0), RationalFunction::from_int(1)).unwrap();
        let ext = extend_along_path(&base, &p).unwrap();
        let u = transform_solution(&ext, &make_chain(&p, n, &[]).unwrap()).unwrap();
        let report = check_stem_lemma(&u, &p, n, 6).unwrap();
        let faces: usize = (1..=n)
            .map(|d| enumerate_faces(n, d, DomainKind::Cube).unwrap().len())
            .sum();
        assert_eq!(report.entries.len(), faces);
        for e in &report.entries {
            assert!(e.passed, "{p}: {e:?}");
        }
    }
}

#[test]
fn stem_restriction_examples() {
    let p = path(&[0, 1, 2, 3]);
    let full = OperatorSpec::transformed(&p, &[]).unwrap();
    let spec = restrict_operator(&full, &cube_face(3, &[(2, 0)])).unwrap();
    let kept: Vec<u32> = spec.entries().map(|(&(i, _), _)| i).collect();
    assert_eq!(kept, vec![3]);
    let spec = restrict_operator(&full, &cube_face(3, &[(1, 1)])).unwrap();
    let kept: Vec<u32> = spec.entries().map(|(&(i, _), _)| i).collect();
    assert_eq!(kept, vec![2, 3]);
    let p2 = path(&[0, 1, 2]);
    let spec = restrict_operator(
        &OperatorSpec::transformed(&p2, &[]).unwrap(),
        &cube_face(2, &[(1, 0)]),
    )
    .unwrap();
    assert_eq!(spec.entries().count(), 1);
}

#[test]
fn stem_control_is_reported() {
    let p = path(&[0, 1, 2]);
    let mut u = transformed_constant(&p);
    u.insert(cube_face(2, &[(1, 1)]), parse_expr("p2^2").unwrap());
    let report = check_stem_lemma(&u, &p, 2, 8).unwrap();
    let bad: Vec<_> = report.entries.iter().filter(|e| !e.passed).collect();
    assert_eq!(bad.len(), 1, "{bad:?}");
    assert!(bad[0].residual > 0.1);
    assert!(bad[0].brute_force_ok);
}

#[test]
fn edge_solve_is_linear() {
    let p = path(&[0, 1, 2]);
    let problem =
        DirichletProblem::from_vertex_fn(OperatorSpec::transformed(&p, &[]).unwrap(), |b| {
            if b == [0, 0] {
                2.0
            } else {
                0.0
            }
        })
        .unwrap();
    let report = solve_dirichlet_cube(&problem, 16).unwrap();
    for i in 0..=16 {
        let x = i as f64 / 16.0;
        assert!((report.grid.get(&[i, 0]) - 2.0 * (1.0 - x)).abs() < 1e-10);
    }
    assert!(report.relative_residual <= 1e-10);
}

#[test]
fn zero_data_gives_zero_solution() {
    let op = OperatorSpec::transformed(&path(&[0, 1, 2, 3]), &[]).unwrap();
    let problem = DirichletProblem::from_vertex_fn(op, |_| 0.0).unwrap();
    let report = solve_dirichlet_cube(&problem, 8).unwrap();
    assert!(report.grid.values().iter().all(|&v| v == 0.0));
}

#[test]
fn dirichlet_setup_errors() {
    let op = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
    let mut data: BTreeMap<Stratum, f64> = enumerate_faces(2, 0, DomainKind::Cube)
        .unwrap()
        .into_iter()
        .map(|v| (v, 0.0))
        .collect();
    let first = data.keys().next().unwrap().clone();
    data.remove(&first);
    assert!(DirichletProblem::new(op.clone(), data).is_err());
    assert!(DirichletProblem::from_vertex_fn(OperatorSpec::simplex(2), |_| 0.0).is_err());
    assert!(DirichletProblem::from_vertex_fn(
        OperatorSpec::transformed(&path(&[0, 1, 2]), &[true]).unwrap(),
        |_| 0.0
    )
    .is_err());
    assert!(DirichletProblem::from_vertex_fn(op.clone(), |_| f64::NAN).is_err());
    let problem = DirichletProblem::from_vertex_fn(op, |_| 1.0).unwrap();
    assert!(solve_dirichlet_cube(&problem, 2).is_err());
}

#[test]
fn uniqueness_reproduces_the_closed_form() {
    let report = uniqueness(1.0, &path(&[0, 1, 2]), &[16, 32, 64], 0.0).unwrap();
    assert!(report.max_deviation() <= 1e-8, "{report:?}");
    let report = uniqueness(1.0, &path(&[0, 1, 2, 3]), &[16], 0.0).unwrap();
    assert!(report.max_deviation() <= 1e-8, "{report:?}");
    let report = uniqueness(1.0, &path(&[0, 2, 1, 3]), &[8], 0.0).unwrap();
    assert!(report.max_deviation() <= 1e-8, "{report:?}");
}

#[test]
fn perturbed_origin_shifts_the_solution() {
    let report = uniqueness(1.0, &path(&[0, 1, 2]), &[16], 0.1).unwrap();
    assert!((report.max_deviation() - 0.1).abs() < 1e-10);
}

#[test]
fn maximum_principle_on_random_data() {
    let report = max_principle(&path(&[0, 1, 2]), 16, 20, 11).unwrap();
    assert_eq!(report.violations, 0, "{report:?}");
    let report = max_principle(&path(&[0, 1, 2, 3]), 8, 20, 12).unwrap();
    assert_eq!(report.violations, 0, "{report:?}");
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let report = convergence_study(&path(&[0, 1, 2]), &[16, 32, 64]).unwrap();
    let order = report.order.unwrap();
    assert!(order >= 1.8, "{report:?}");
    assert!(report.to_csv().starts_with("N,max_dev,fitted_order\n"));
}

#[test]
fn interior_solve_of_a_linear_function_is_exact() {
    let op = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
    let f = |x: &[f64]| 0.3 + x[0] - 2.0 * x[1];
    let report = solve_cube_interior(&op, 16, &f, &|_| 0.0).unwrap();
    assert!(report.grid.max_deviation(f) < 1e-10);
}

#[test]
fn incompatibility_limits_and_continuity() {
    let report = incompatibility_samples(1.5).unwrap();
    let expected = [1.5, 0.0, 0.75];
    for ((_, limit, want), e) in report.limits.iter().zip(expected) {
        assert!((limit - e).abs() <= 1e-8 && *want == e);
    }
    assert!(report.max_jump <= report.jump_bound);
    assert!(report.to_csv().lines().count() > 3 * 8);
}

#[test]
fn verify_all_is_deterministic_and_passes() {
    let mut options = SuiteOptions::new(path(&[0, 1, 2]), 7);
    options.points = 500;
    options.solve_grids = vec![8, 16];
    options.convergence_grids = vec![8, 16, 32];
    let first = run_suite(Suite::All, &options);
    let second = run_suite(Suite::All, &options);
    assert_eq!(first, second);
    for report in &first {
        for case in &report.cases {
            assert_eq!(case.status, CaseStatus::Pass, "{}: {case:?}", report.suite);
        }
    }
    let json: Vec<String> = first.iter().map(|r| r.to_json()).collect();
    assert!(json.iter().all(|j| j.contains("\"cases\"")));
}

#[test]
fn suites_on_a_higher_base_face() {
    let mut options = SuiteOptions::new(OrderedPath::new(vec![1, 2, 3], 3).unwrap(), 3);
    options.points = 300;
    options.fd_grid = 16;
    for suite in [
        Suite::Roundtrip,
        Suite::Operator,
        Suite::Extension,
        Suite::Transform,
        Suite::Faces,
    ] {
        for report in run_suite(suite, &options) {
            assert!(report.passed(), "{}", report.to_json());
        }
    }
    let stem = run_suite(Suite::Stem, &options);
    assert!(!stem[0].passed());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn solver_respects_the_maximum_principle(values in prop::collection::vec(-5.0f64..5.0, 8)) {
        let op = OperatorSpec::transformed(&path(&[0, 1, 2, 3]), &[]).unwrap();
        let problem = DirichletProblem::from_vertex_fn(op, |b| values[(b[0] + 2 * b[1] + 4 * b[2]) as usize]).unwrap();
        let report = solve_dirichlet_cube(&problem, 6).unwrap();
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(report.grid.max() <= hi + 1e-10);
        prop_assert!(report.grid.min() >= lo - 1e-10);
    }

    #[test]
    fn solver_is_linear_in_the_data(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let op = OperatorSpec::transformed(&path(&[0, 1, 2]), &[]).unwrap();
        let e0 = |bits: &[u8]| if bits == [0, 0] { 1.0 } else { 0.0 };
        let e1 = |bits: &[u8]| if bits == [1, 1] { 1.0 } else { 0.0 };
        let solve = |f: &dyn Fn(&[u8]) -> f64| {
            solve_dirichlet_cube(&DirichletProblem::from_vertex_fn(op.clone(), f).unwrap(), 8).unwrap().grid
        };
        let (u0, u1) = (solve(&e0), solve(&e1));
        let combined = solve(&|bits: &[u8]| a * e0(bits) + b * e1(bits));
        for i in 0..combined.values().len() {
            let want = a * u0.values()[i] + b * u1.values()[i];
            prop_assert!((combined.values()[i] - want).abs() < 1e-9);
        }
    }
}
