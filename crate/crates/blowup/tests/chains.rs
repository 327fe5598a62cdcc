use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfblow_algebra::{param, parse_expr, RationalFunction, Var};
use wfblow_blowup::{
    make_chain, make_chart, map_face, map_face_inverse, pullback_defect, standard_facets,
    transform_operator, transform_solution, BlowupChain, BlowupError,
};
use wfblow_extension::{affine, eigen_product, extend_along_path, vertex_constant};
use wfblow_geometry::{
    additional_faces, classify_point, subsets, DomainKind, OrderedPath, Point, Stratum,
};

fn identity_path(n: usize) -> OrderedPath {
    OrderedPath::new((0..=n).collect(), n).unwrap()
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, x);
            out.push(tail);
        }
    }
    out
}

/// Every path in dimension `n` whose base face contains vertex 0 and that
/// leaves room for at least one blow-up step.
fn chain_paths(n: usize) -> Vec<OrderedPath> {
    let mut out = Vec::new();
    let vertices: Vec<usize> = (0..=n).collect();
    for len in 3..=(n + 1) {
        for perm in permutations(&vertices) {
            let candidate = OrderedPath::new(perm[..len].to_vec(), n).unwrap();
            let base = candidate.face_vertices(candidate.base_dim());
            if base.contains(&0) && !out.contains(&candidate) {
                out.push(candidate);
            }
        }
    }
    out
}

fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn var(v: usize) -> RationalFunction {
    RationalFunction::var(v as Var)
}

fn interior_simplex_point(rng: &mut ChaCha8Rng, n: usize) -> Point {
    let w: Vec<f64> = (0..=n).map(|_| -rng.gen_range(1e-9f64..1.0).ln()).collect();
    let total: f64 = w.iter().sum();
    Point::new(w[1..].iter().map(|x| x / total).collect()).unwrap()
}

/// Forward map through tail sums, with the value 0 wherever a ratio is 0/0.
fn forward_with_convention(path: &OrderedPath, p: &[f64]) -> Vec<f64> {
    let n = path.n();
    let k = path.base_dim();
    let bary = |v: usize| {
        if v == 0 {
            1.0 - p.iter().sum::<f64>()
        } else {
            p[v - 1]
        }
    };
    let sum = |j: usize| (j..=n).map(|l| bary(path.at(l))).sum::<f64>();
    let mut q = p.to_vec();
    q[path.at(k + 1) - 1] = sum(k + 1);
    for j in (k + 2)..=n {
        let below = sum(j - 1);
        q[path.at(j) - 1] = if below <= 0.0 { 0.0 } else { sum(j) / below };
    }
    q
}

#[test]
fn roundtrip_is_exact_and_numerically_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 2..=6 {
        let chain = make_chain(&identity_path(n), n, &[]).unwrap();
        for (v, g) in chain.inverse() {
            let back = g.substitute(chain.forward()).unwrap();
            assert!(
                (&back - &var(*v as usize)).is_identically_zero(),
                "n = {n}, p{v}"
            );
        }
        let mut worst: f64 = 0.0;
        for _ in 0..10_000 {
            let p = interior_simplex_point(&mut rng, n);
            let back = chain.apply_inverse(&chain.apply(&p).unwrap()).unwrap();
            worst = worst.max(back.max_abs_diff(&p));
        }
        assert!(worst <= 1e-12, "n = {n}: {worst:e}");
    }
}

#[test]
fn composite_matches_closed_forms_for_every_path_and_orientation() {
    for n in 2..=4 {
        for path in chain_paths(n) {
            let steps = n - path.base_dim() - 1;
            for mask in 0..(1u32 << steps) {
                let flips: Vec<bool> = (0..steps).map(|m| mask & (1 << m) != 0).collect();
                let chain = make_chain(&path, n, &flips).unwrap();
                for (built, closed) in [
                    (chain.forward(), chain.closed_forward()),
                    (chain.inverse(), chain.closed_inverse()),
                ] {
                    assert_eq!(built.len(), closed.len());
                    for (v, f) in built {
                        assert!(f.equals(&closed[v]), "{path} {flips:?} p{v}");
                    }
                }
            }
        }
    }
}

#[test]
fn closed_form_examples() {
    let chain = make_chain(&identity_path(2), 2, &[]).unwrap();
    assert!(chain.forward()[&1].equals(&parse_expr("p1 + p2").unwrap()));
    assert!(chain.forward()[&2].equals(&parse_expr("p2/(p1 + p2)").unwrap()));
    let chain = make_chain(&identity_path(3), 3, &[]).unwrap();
    assert!(chain.forward()[&3].equals(&parse_expr("p3/(p2 + p3)").unwrap()));
    assert!(chain.inverse()[&2].equals(&parse_expr("p1*p2*(1 - p3)").unwrap()));
    let q = chain
        .apply(&Point::new(vec![0.1, 0.2, 0.3]).unwrap())
        .unwrap();
    assert!((q.get(1) - 0.6).abs() < 1e-15);
    assert!((q.get(2) - 0.5 / 0.6).abs() < 1e-15);
    assert!((q.get(3) - 0.6).abs() < 1e-15);
}

/// Every monomial in `p1..pn` of total degree at most `degree`.
fn monomials(n: usize, degree: usize) -> Vec<RationalFunction> {
    let mut out = vec![RationalFunction::one()];
    let mut layer = vec![(RationalFunction::one(), 1usize)];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (m, lowest) in &layer {
            for v in *lowest..=n {
                next.push((m * &var(v), v));
            }
        }
        out.extend(next.iter().map(|(m, _)| m.clone()));
        layer = next;
    }
    out
}

#[test]
fn operator_transforms_by_the_chain_rule() {
    for n in 2..=4 {
        let basis = monomials(n, 3);
        let mut paths = vec![identity_path(n)];
        let reversed: Vec<usize> = std::iter::once(0).chain((1..=n).rev()).collect();
        paths.push(OrderedPath::new(reversed, n).unwrap());
        if n >= 3 {
            paths.push(OrderedPath::new((1..=n).collect(), n).unwrap());
        }
        for path in paths {
            let chain = make_chain(&path, n, &[]).unwrap();
            for f in &basis {
                let defect = pullback_defect(&chain, f).unwrap();
                assert!(defect.is_identically_zero(), "{path}, f = {f}: {defect}");
            }
        }
    }
}

#[test]
fn flipped_chains_also_transform_the_operator() {
    let path = identity_path(3);
    for flips in [[true, false], [false, true], [true, true]] {
        let chain = make_chain(&path, 3, &flips).unwrap();
        for f in monomials(3, 3) {
            assert!(pullback_defect(&chain, &f).unwrap().is_identically_zero());
        }
    }
}

#[test]
fn flip_covariance() {
    let n = 4;
    let path = identity_path(n);
    let plain = make_chain(&path, n, &[]).unwrap();
    let plain_op = transform_operator(&plain, n).unwrap();
    let base = vertex_constant(n, 0, var(param('c') as usize)).unwrap();
    let ext = extend_along_path(&base, &path).unwrap();
    let plain_u = transform_solution(&ext, &plain).unwrap();
    for m in 1..=(n - 1) {
        let mut flips = vec![false; n - 1];
        flips[m - 1] = true;
        let flipped = make_chain(&path, n, &flips).unwrap();
        let rho = path.at(n - m + 1);
        let swap = BTreeMap::from([(rho as Var, &RationalFunction::one() - &var(rho))]);
        for (v, f) in flipped.forward() {
            let expected = if *v as usize == rho {
                &RationalFunction::one() - &plain.forward()[v]
            } else {
                plain.forward()[v].clone()
            };
            assert!(f.equals(&expected), "step {m}, p{v}");
        }
        for (v, g) in flipped.inverse() {
            assert!(
                g.equals(&plain.inverse()[v].substitute(&swap).unwrap()),
                "step {m}, p{v}"
            );
        }
        let op = transform_operator(&flipped, n).unwrap();
        for ((i, j), coeff) in plain_op.entries() {
            let mine = op.coefficient(*i as usize, *j as usize).unwrap();
            assert!(
                mine.equals(&coeff.substitute(&swap).unwrap()),
                "step {m}, a{i}{j}"
            );
        }
        let u = transform_solution(&ext, &flipped).unwrap();
        let top = flipped.domain().unwrap();
        let expected = plain_u.get(&top).unwrap().substitute(&swap).unwrap();
        assert!(u.get(&top).unwrap().equals(&expected));
    }
}

#[test]
fn face_dictionary_roundtrips() {
    for n in 2..=4 {
        for path in chain_paths(n) {
            let chain = make_chain(&path, n, &[]).unwrap();
            let vertices: Vec<usize> = (0..=n).collect();
            for size in 1..=(n + 1) {
                for set in subsets(&vertices, size) {
                    let face = Stratum::simplex_face(n, &set).unwrap();
                    let image = map_face(&chain, &face).unwrap();
                    assert_eq!(
                        map_face_inverse(&chain, &image).unwrap(),
                        face,
                        "{path}: {face} -> {image}"
                    );
                }
            }
        }
    }
}

#[test]
fn chart_dictionary_roundtrips() {
    for n in 2..=4 {
        for (sigma, rho) in [(1, 2), (2, 1), (1, n), (n - 1, n)] {
            for flipped in [false, true] {
                let chart = make_chart(sigma, rho, flipped).unwrap();
                let vertices: Vec<usize> = (0..=n).collect();
                for size in 1..=(n + 1) {
                    for set in subsets(&vertices, size) {
                        let face = Stratum::simplex_face(n, &set).unwrap();
                        let image = map_face(&chart, &face).unwrap();
                        assert_eq!(map_face_inverse(&chart, &image).unwrap(), face);
                    }
                }
            }
        }
    }
}

#[test]
fn dictionary_agrees_with_sampled_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=4 {
        for path in chain_paths(n).into_iter().filter(|p| p.base_dim() == 0) {
            let chain = make_chain(&path, n, &[]).unwrap();
            let vertices: Vec<usize> = (0..=n).collect();
            for size in 1..=(n + 1) {
                for set in subsets(&vertices, size) {
                    let face = Stratum::simplex_face(n, &set).unwrap();
                    let image = map_face(&chain, &face).unwrap();
                    for _ in 0..5 {
                        let w: Vec<f64> = set.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
                        let total: f64 = w.iter().sum();
                        let mut p = vec![0.0; n];
                        for (&v, x) in set.iter().zip(&w) {
                            if v > 0 {
                                p[v - 1] = x / total;
                            }
                        }
                        let q = Point::new(forward_with_convention(&path, &p)).unwrap();
                        let found = classify_point(&q, n, DomainKind::Cube).unwrap();
                        assert_eq!(found, image, "{path}: {face}");
                    }
                }
            }
        }
    }
}

#[test]
fn unit_faces_lie_over_vanishing_coordinates() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for n in 2..=4 {
        let path = identity_path(n);
        let chain = make_chain(&path, n, &[]).unwrap();
        for j in 1..=n {
            for _ in 0..200 {
                let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
                q[path.at(j) - 1] = 1.0;
                let p = chain.apply_inverse(&Point::new(q).unwrap()).unwrap();
                let lost = path.at(j - 1);
                let value = if lost == 0 { p.p0() } else { p.get(lost) };
                assert!(value.abs() <= 1e-12, "n = {n}, j = {j}: {value:e}");
            }
        }
    }
}

#[test]
fn standard_facets_and_additional_faces() {
    for n in 2..=4 {
        let path = identity_path(n);
        let chain = make_chain(&path, n, &[]).unwrap();
        let facets = standard_facets(&chain).unwrap();
        for (facet, image) in &facets {
            let lost = (0..=n).find(|v| !facet.simplex().contains(v)).unwrap();
            let (coord, value) = if lost == n { (n, 0) } else { (lost + 1, 1) };
            assert_eq!(
                image.fixed().get(&path.at(coord)),
                Some(&value),
                "{facet} -> {image}"
            );
            assert_eq!(image.dim(), n - 1);
        }
        let extra = additional_faces(&path);
        assert_eq!(extra.len(), n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for (j, piece) in extra.iter().enumerate() {
            for _ in 0..500 {
                let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..0.99)).collect();
                q[j] = 0.0;
                for x in q.iter_mut().skip(j + 1) {
                    if rng.gen_bool(0.3) {
                        *x = if rng.gen_bool(0.5) { 0.0 } else { 1.0 };
                    }
                }
                if q[j + 1..].iter().all(|&x| x == 0.0) {
                    continue;
                }
                let q = Point::new(q).unwrap();
                assert!(piece.contains(&q));
                for (_, image) in &facets {
                    assert!(!image.contains(&q), "{piece} meets {image}");
                }
            }
        }
    }
}

#[test]
fn additional_faces_fill_the_complement_of_the_image() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for n in 2..=5 {
        let path = identity_path(n);
        let chain = make_chain(&path, n, &[]).unwrap();
        for _ in 0..4000 {
            let q: Vec<f64> = (0..n)
                .map(|_| match rng.gen_range(0..4) {
                    0 => 0.0,
                    1 => 1.0,
                    _ => rng.gen_range(0.0..1.0),
                })
                .collect();
            let point = Point::new(q.clone()).unwrap();
            let p = chain.apply_inverse(&point).unwrap();
            let again = forward_with_convention(&path, p.coords());
            let in_image = again.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-12);
            let in_extra = (0..n - 1).any(|j| q[j] == 0.0 && q[j + 1..].iter().any(|&x| x > 0.0));
            assert_ne!(in_image, in_extra, "{q:?}");
        }
    }
}

#[test]
fn transformed_vertex_constant_is_the_product_form() {
    let c = var(param('c') as usize);
    for n in 1..=4 {
        for perm in permutations(&(1..=n).collect::<Vec<_>>()) {
            let path = OrderedPath::new([vec![0], perm].concat(), n).unwrap();
            let ext = extend_along_path(&vertex_constant(n, 0, c.clone()).unwrap(), &path).unwrap();
            let u = wfblow_blowup::transform_extension(&ext, &[]).unwrap();
            let mut expected = c.clone();
            for v in 1..=n {
                expected = &expected * &(&RationalFunction::one() - &var(v));
            }
            let top = Stratum::cube_face(n, &(1..=n).collect::<Vec<_>>(), BTreeMap::new()).unwrap();
            assert!(u.get(&top).unwrap().equals(&expected), "{path}");
            for (face, piece) in u.pieces() {
                if face.fixed().values().any(|&b| b == 1) {
                    assert!(piece.is_identically_zero(), "{path}: {face}");
                }
            }
        }
    }
}

#[test]
fn transformed_value_matches_the_extension() {
    let path = identity_path(2);
    let ext = extend_along_path(
        &vertex_constant(2, 0, var(param('c') as usize)).unwrap(),
        &path,
    )
    .unwrap();
    let chain = make_chain(&path, 2, &[]).unwrap();
    let u = transform_solution(&ext, &chain).unwrap();
    let c = 1.3;
    let params = [(param('c'), c)];
    let q = Point::new(vec![0.5, 0.6]).unwrap();
    let tilde = u
        .evaluate_with_params(&q, 0.0, DomainKind::Cube, &params)
        .unwrap();
    let p = Point::new(vec![0.2, 0.3]).unwrap();
    let bar = ext
        .pieces()
        .evaluate_with_params(&p, 0.0, DomainKind::Simplex, &params)
        .unwrap();
    assert!((tilde - 0.2 * c).abs() <= 1e-12);
    assert!((tilde - bar).abs() <= 1e-12);
}

#[test]
fn higher_base_faces_transform_consistently() {
    let n = 3;
    let path = OrderedPath::new(vec![1, 2, 3], n).unwrap();
    let chain = make_chain(&path, n, &[]).unwrap();
    let base = affine(n, &[0, 1], int(1), &[(1, int(2))]).unwrap();
    let u = transform_solution(&extend_along_path(&base, &path).unwrap(), &chain).unwrap();
    assert_eq!(u.len(), 3);
    let top = chain.domain().unwrap();
    assert!(u
        .get(&top)
        .unwrap()
        .equals(&parse_expr("(1 + 2*(p1 + p2))*p1/(p1 + p2)*(1 - p3)").unwrap()));
    let path = OrderedPath::new(vec![2, 3, 4], 4).unwrap();
    let chain = make_chain(&path, 4, &[]).unwrap();
    let base = eigen_product(4, &[0, 1, 2], 1, 2).unwrap();
    assert!(transform_solution(&extend_along_path(&base, &path).unwrap(), &chain).is_ok());
    let other = make_chain(&identity_path(4), 4, &[]).unwrap();
    assert!(matches!(
        transform_solution(&extend_along_path(&base, &path).unwrap(), &other),
        Err(BlowupError::Domain(_))
    ));
}

#[test]
fn chain_serializes_its_maps() {
    let chain: BlowupChain = make_chain(&identity_path(2), 2, &[]).unwrap();
    let json = chain.to_json();
    assert_eq!(json["forward"]["p1"], "p1 + p2");
    assert_eq!(json["steps"].as_array().unwrap().len(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn forward_after_inverse_is_identity_on_the_open_cube(
        n in 2usize..=6,
        raw in prop::collection::vec(0.001f64..0.999, 6),
    ) {
        let chain = make_chain(&identity_path(n), n, &[]).unwrap();
        let q = Point::new(raw[..n].to_vec()).unwrap();
        let back = chain.apply(&chain.apply_inverse(&q).unwrap()).unwrap();
        prop_assert!(back.max_abs_diff(&q) <= 1e-9);
    }
}
