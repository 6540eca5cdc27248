use dpda::cones::Cone;
use dpda::dualbound::{dual_bound, interior_radius, SlaterCertificate};
use dpda::problems::reference_solution;
use dpda::prox::ProxOracle;
use dpda::solver::{AgentData, SharingProblem, SmoothTerm};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random strongly convex instance with a strictly feasible point placed at
/// margin `1` inside the cone. Returns the problem, the point and the
/// unconstrained lower value `-Σ ½cᵢᵀQᵢ⁻¹cᵢ`.
fn instance(seed: u64, cone: Cone) -> (SharingProblem, Vec<DVector<f64>>, f64) {
    let mut rng = dpda::seed::stream(seed, 0, "dual-bound-instance");
    let m = cone.dim();
    let agents_n = rng.random_range(1..4);
    let mut interior = DVector::zeros(m);
    match &cone {
        Cone::SecondOrder(d) => interior[d - 1] = 2.0,
        _ => interior.fill(1.0),
    }
    let mut parts = Vec::new();
    let mut points = Vec::new();
    let mut image = DVector::zeros(m);
    let mut lower = 0.0;
    for _ in 0..agents_n {
        let n = rng.random_range(1..4);
        let r = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let q = &a * a.transpose() + DMatrix::identity(n, n) * 0.3;
        let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        lower -= 0.5 * c.dot(&q.clone().cholesky().unwrap().solve(&c));
        let x = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        image += &r * &x;
        points.push(x);
        parts.push((r, q, c));
    }
    let offset = (&image - &interior) / agents_n as f64;
    let agents = parts
        .into_iter()
        .map(|(r, hessian, linear)| {
            AgentData::new(r, offset.clone(), SmoothTerm::Quadratic { hessian, linear }, ProxOracle::L1Norm).unwrap()
        })
        .collect();
    (SharingProblem::new(cone, agents).unwrap(), points, lower)
}

#[test]
fn bound_dominates_reference_dual_norm() {
    for seed in 0..50u64 {
        let mut rng = dpda::seed::stream(seed, 1, "dual-bound-cone");
        let m = rng.random_range(2..5);
        let cone = if seed % 2 == 0 { Cone::NonnegOrthant(m) } else { Cone::SecondOrder(m) };
        let (problem, point, lower) = instance(seed, cone);
        let cert = SlaterCertificate::from_point(&problem, point, lower).unwrap();
        let b = dual_bound(&cert, problem.cone()).unwrap();
        let reference = reference_solution(&problem, 1e-12).unwrap();
        assert!(b >= reference.dual.norm(), "seed {seed}: B = {b}, ‖y*‖ = {}", reference.dual.norm());
    }
}

#[test]
fn orthant_radius_is_exactly_the_smallest_entry() {
    let mut rng = dpda::seed::stream(0, 0, "orthant-radius");
    for _ in 0..200 {
        let g = DVector::from_fn(rng.random_range(1..8), |_, _| rng.random_range(1e-3..10.0));
        assert_eq!(interior_radius(&Cone::NonnegOrthant(g.len()), &g).unwrap(), g.min());
    }
}
