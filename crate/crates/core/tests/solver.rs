use dpda::cones::Cone;
use dpda::graphs::{gen_schedule, gen_small_world, static_schedule, GraphRound};
use dpda::metrics::{consensus_violation, ErgodicAverage};
use dpda::mixing::{BudgetRule, ConsensusGeometry, ConsensusMixer, MixingBudget, Protocol};
use dpda::problems::{bpd_slater_certificate, bpd_to_sharing, even_partition, gen_bpd, reference_solution, uniform_start};
use dpda::prox::ProxOracle;
use dpda::solver::*;
use dpda::dualbound::dual_bound;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Three agents, two coupling rows, two variables each, strongly convex
/// quadratics plus ℓ1, orthant cone, strictly feasible at a known point.
fn tiny_orthant(seed: u64) -> SharingProblem {
    let mut rng = dpda::seed::stream(seed, 0, "tiny-orthant");
    let mut parts = Vec::new();
    let mut image = DVector::zeros(2);
    for _ in 0..3 {
        let r = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
        let hessian = &a * a.transpose() + DMatrix::identity(2, 2) * 0.5;
        let linear = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let point = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        image += &r * &point;
        parts.push((r, hessian, linear));
    }
    let offset = (&image - DVector::from_element(2, 1.0)) / 3.0;
    let agents = parts
        .into_iter()
        .map(|(r, hessian, linear)| {
            AgentData::new(r, offset.clone(), SmoothTerm::Quadratic { hessian, linear }, ProxOracle::L1Norm).unwrap()
        })
        .collect();
    SharingProblem::new(Cone::NonnegOrthant(2), agents).unwrap()
}

fn zeros(p: &SharingProblem) -> Vec<DVector<f64>> {
    p.dims().iter().map(|&d| DVector::zeros(d)).collect()
}

#[test]
fn single_agent_static_run_is_centralized_pda() {
    let a = AgentData::new(
        DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 0.2, 0.3, 1.0, -1.0]),
        DVector::from_vec(vec![0.4, -0.2]),
        SmoothTerm::Quadratic { hessian: DMatrix::identity(3, 3), linear: DVector::from_vec(vec![0.1, 0.0, -0.3]) },
        ProxOracle::L1Norm,
    )
    .unwrap();
    let p = SharingProblem::new(Cone::SecondOrder(2), vec![a]).unwrap();
    let c = CentralizedSteps::balanced(&p, 1.0).unwrap();
    let steps = StepSizes { primal: vec![c.primal], dual: vec![c.dual], consensus: ConsensusStep::Global(1.0) };
    let mut opts = RunOptions::new(300);
    opts.store_iterates = true;
    let start = vec![DVector::from_vec(vec![1.0, 2.0, -1.0])];
    let s = dpda_s_run(&p, &GraphRound::empty(1, false), &steps, &start, &opts, None).unwrap();
    let c = centralized_pda_run(&p, c, &start, None, &opts, None).unwrap();
    for (a, b) in s.history.iter().zip(&c.history) {
        assert!((&a.primal[0] - &b.primal[0]).norm() <= 1e-12);
        assert!((&a.dual - &b.dual).norm() <= 1e-12);
    }
}

#[test]
fn centralized_fixed_point_is_preserved() {
    let p = tiny_orthant(3);
    let r = reference_solution(&p, 1e-13).unwrap();
    let c = CentralizedSteps::balanced(&p, 1.0).unwrap();
    let out = centralized_pda_run(&p, c, &r.primal, Some(&r.dual), &RunOptions::new(50), None).unwrap();
    for (a, b) in out.primal.iter().zip(&r.primal) {
        assert!((a - b).norm() < 1e-9);
    }
    assert!((out.dual.column(0) - &r.dual).norm() < 1e-9);
}

struct DynamicSetup {
    problem: SharingProblem,
    mixer: ConsensusMixer,
    steps: StepSizes,
    start: Vec<DVector<f64>>,
    bound: f64,
}

fn bpd_dynamic(seed: u64, directed: bool) -> DynamicSetup {
    let inst = gen_bpd(40, 8, 4, Some(30.0), 0.05, seed).unwrap();
    let part = even_partition(40, if directed { 12 } else { 8 }).unwrap();
    let problem = bpd_to_sharing(&inst, &part).unwrap();
    let bound = dual_bound(&bpd_slater_certificate(&inst, &part, &problem).unwrap(), problem.cone()).unwrap();
    let n = problem.agent_count();
    let protocol = if directed {
        Protocol::PushSum(gen_schedule(dpda::graphs::twelve_node_digraph(), 5, 0.8, seed).unwrap())
    } else {
        Protocol::Undirected(gen_schedule(gen_small_world(n, 12, seed).unwrap(), 5, 0.8, seed).unwrap())
    };
    let geom = ConsensusGeometry::new(problem.coupling_dim(), n, bound).unwrap();
    let mixer = ConsensusMixer::new(geom, protocol, MixingBudget::new(BudgetRule::default()).unwrap()).unwrap();
    let steps = StepSizes::dynamic_default(&problem, 1.0).unwrap();
    let start = uniform_start(&problem, &mut dpda::seed::stream(seed, 0, "start"));
    DynamicSetup { problem, mixer, steps, start, bound }
}

#[test]
fn dynamic_iterates_stay_feasible_and_bounded() {
    for directed in [false, true] {
        let DynamicSetup { problem, mut mixer, steps, start, bound } = bpd_dynamic(4, directed);
        let cone = problem.cone().clone();
        let n = problem.agent_count() as f64;
        let mut checked = 0;
        let mut obs = |view: &IterView| {
            for col in view.dual.column_iter() {
                let col = col.into_owned();
                assert!(col.norm() <= 2.0 * bound * (1.0 + 1e-15));
                assert!(cone.project(&col).unwrap().norm() <= 1e-12 * (1.0 + col.norm()), "dual leaves the polar cone");
            }
            let v = view.aux.expect("dynamic runs expose v");
            assert!(v.norm() <= 4.0 * n.sqrt() * bound * view.k as f64);
            checked += 1;
        };
        dpda_d_run(&problem, &mut mixer, &steps, &start, &RunOptions::new(400), Some(&mut obs)).unwrap();
        assert_eq!(checked, 400);
    }
}

#[test]
fn exact_mixing_first_step_leaves_v_at_zero() {
    let DynamicSetup { problem, steps, start, bound, .. } = bpd_dynamic(5, false);
    let geom = ConsensusGeometry::new(problem.coupling_dim(), problem.agent_count(), bound).unwrap();
    let mut mixer = ConsensusMixer::new(geom, Protocol::Exact, MixingBudget::new(BudgetRule::default()).unwrap()).unwrap();
    let mut first = None;
    let mut obs = |view: &IterView| {
        if view.k == 1 {
            first = Some(view.aux.unwrap().norm());
        }
    };
    let trace = dpda_d_run(&problem, &mut mixer, &steps, &start, &RunOptions::new(3), Some(&mut obs)).unwrap();
    assert_eq!(first, Some(0.0));
    assert_eq!(trace.comms, 0);
}

#[test]
fn ergodic_average_matches_recomputation() {
    let DynamicSetup { problem, mut mixer, steps, start, .. } = bpd_dynamic(6, false);
    let mut opts = RunOptions::new(250);
    opts.store_iterates = true;
    let trace = dpda_d_run(&problem, &mut mixer, &steps, &start, &opts, None).unwrap();
    let mut avg = ErgodicAverage::new(&problem.dims(), problem.coupling_dim(), problem.agent_count());
    let mut primal_sum: Vec<DVector<f64>> = zeros(&problem);
    let mut dual_sum = DMatrix::zeros(problem.coupling_dim(), problem.agent_count());
    let mut mean_consensus = 0.0;
    for it in &trace.history {
        avg.push(&it.primal, &it.dual);
        for (s, x) in primal_sum.iter_mut().zip(&it.primal) {
            *s += x;
        }
        dual_sum += &it.dual;
        mean_consensus += consensus_violation(&it.dual);
    }
    let k = trace.history.len() as f64;
    mean_consensus /= k;
    assert_eq!(avg.dual(), trace.average.dual());
    for (a, s) in trace.average.primal().iter().zip(&primal_sum) {
        assert!((a - s / k).norm() <= 1e-12 * (1.0 + a.norm()));
    }
    assert!((trace.average.dual() - &dual_sum / k).norm() <= 1e-12 * (1.0 + dual_sum.norm() / k));
    assert!(consensus_violation(trace.average.dual()) <= mean_consensus + 1e-12);
}

#[test]
fn static_error_bound_holds_along_run() {
    let p = tiny_orthant(1);
    let reference = reference_solution(&p, 1e-13).unwrap();
    let graph = GraphRound::new(3, [(0, 1), (1, 2)], false).unwrap();
    // Edge-count γ, τ_i = 1/(L_i + ‖R_i‖) and κ_i = 1/(2γd_i + ‖R_i‖): the
    // static condition at equality.
    let gamma = 2.0 * 3.0 / graph.edge_count() as f64;
    let steps = StepSizes {
        primal: p.agents().iter().map(|a| 1.0 / (a.lipschitz() + a.op_norm())).collect(),
        dual: p.agents().iter().zip(graph.degrees()).map(|(a, d)| 1.0 / (2.0 * gamma * d as f64 + a.op_norm())).collect(),
        consensus: ConsensusStep::Global(gamma),
    };
    let start = zeros(&p);
    let theta = theta_one(&p, &steps, &start, &reference).unwrap();
    let yn = reference.dual.norm();
    let mut worst: f64 = 0.0;
    let mut obs = |view: &IterView| {
        if view.k >= 10 {
            let lhs = theorem1_lhs(&p, &graph, view.k, view.average.primal(), view.average.dual(), yn).unwrap();
            worst = worst.max(lhs / theta);
        }
    };
    dpda_s_run(&p, &graph, &steps, &start, &RunOptions::new(2000), Some(&mut obs)).unwrap();
    assert!(worst <= 1.0, "K·lhs reached {worst}·Θ₁");
}

#[test]
fn exact_mixing_matches_many_round_mixing_and_reference() {
    let inst = gen_bpd(30, 6, 3, Some(30.0), 0.05, 8).unwrap();
    let part = even_partition(30, 5).unwrap();
    let problem = bpd_to_sharing(&inst, &part).unwrap();
    let reference = reference_solution(&problem, 1e-12).unwrap();
    let bound = dual_bound(&bpd_slater_certificate(&inst, &part, &problem).unwrap(), problem.cone()).unwrap();
    let graph = gen_small_world(5, 7, 8).unwrap();
    let steps = StepSizes::dynamic_default(&problem, 1.0).unwrap();
    let start = zeros(&problem);
    let geom = ConsensusGeometry::new(problem.coupling_dim(), 5, bound).unwrap();
    let iterations = 20_000;
    let budget = |rule| MixingBudget::new(rule).unwrap();
    let mut exact = ConsensusMixer::new(geom.clone(), Protocol::Exact, budget(BudgetRule::default())).unwrap();
    let a = dpda_d_run(&problem, &mut exact, &steps, &start, &RunOptions::new(iterations), None).unwrap();
    let mut gossip =
        ConsensusMixer::new(geom, Protocol::Undirected(static_schedule(graph).unwrap()), budget(BudgetRule::Constant(200)))
            .unwrap();
    let b = dpda_d_run(&problem, &mut gossip, &steps, &start, &RunOptions::new(iterations), None).unwrap();
    let rel = (problem.objective_finite(&a.primal) - reference.objective).abs() / reference.objective;
    assert!(rel < 1e-4, "relative error {rel}");
    let gap: f64 = a.primal.iter().zip(&b.primal).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt();
    assert!(gap < 1e-5, "terminal primal gap {gap}");
    assert!((&a.dual - &b.dual).norm() < 1e-5);
}

#[test]
fn gap_with_cone_penalty_is_nonnegative() {
    let DynamicSetup { problem, mut mixer, steps, start, .. } = bpd_dynamic(9, false);
    let reference = reference_solution(&problem, 1e-12).unwrap();
    let mut opts = RunOptions::new(1000);
    opts.snapshots = vec![10, 50, 100, 500, 1000];
    let trace = dpda_d_run(&problem, &mut mixer, &steps, &start, &opts, None).unwrap();
    let points = theorem2_certificate(&problem, &trace.snapshots, &reference, 1.0, None).unwrap();
    assert_eq!(points.len(), 5);
    for p in points {
        assert!(p.gap >= -1e-8, "k = {}: gap {}", p.k, p.gap);
        assert_eq!(p.holds(), None);
    }
}

#[test]
fn rejects_mismatched_inputs() {
    let DynamicSetup { problem, mut mixer, steps, start, .. } = bpd_dynamic(2, false);
    let mut bad = steps.clone();
    bad.consensus = ConsensusStep::PerAgent(vec![1.0; problem.agent_count()]);
    assert!(dpda_d_run(&problem, &mut mixer, &bad, &start, &RunOptions::new(2), None).is_err());
    let mut too_big = steps.clone();
    too_big.dual.iter_mut().for_each(|k| *k *= 10.0);
    assert!(matches!(
        dpda_d_run(&problem, &mut mixer, &too_big, &start, &RunOptions::new(2), None),
        Err(dpda::Error::StepSize(_))
    ));
    assert!(dpda_d_run(&problem, &mut mixer, &steps, &start[1..], &RunOptions::new(2), None).is_err());
}
