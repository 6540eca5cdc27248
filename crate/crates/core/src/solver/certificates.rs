use nalgebra::{DMatrix, DVector};

use super::problem::{ReferenceSolution, SharingProblem};
use super::steps::{ConsensusStep, StepSizes};
use super::trace::ErgodicSnapshot;
use crate::error::{check_dim, Error, Result};
use crate::graphs::GraphRound;
use crate::metrics::{consensus_distance, incidence_norm};
use crate::mixing::BudgetRule;

fn global_gamma(steps: &StepSizes) -> Result<f64> {
    match steps.consensus {
        ConsensusStep::Global(g) => Ok(g),
        ConsensusStep::PerAgent(_) => Err(Error::InvalidArgument(
            "the certificate constant needs a single consensus step".into(),
        )),
    }
}

/// `1/(2γ) + Σ_i [(1/τ_i)‖ξ_i* - ξ_i⁰‖² + (4/κ_i)‖y*‖²]`.
pub fn theta_one(
    problem: &SharingProblem,
    steps: &StepSizes,
    start: &[DVector<f64>],
    reference: &ReferenceSolution,
) -> Result<f64> {
    problem.check_primal(start)?;
    problem.check_primal(&reference.primal)?;
    check_dim(problem.agent_count(), steps.primal.len())?;
    check_dim(problem.agent_count(), steps.dual.len())?;
    let gamma = global_gamma(steps)?;
    let y2 = reference.dual.norm_squared();
    let sum: f64 = (0..problem.agent_count())
        .map(|i| (&reference.primal[i] - &start[i]).norm_squared() / steps.primal[i] + 4.0 * y2 / steps.dual[i])
        .sum();
    Ok(0.5 / gamma + sum)
}

/// Same expression as [`theta_one`], used with the time-varying steps.
pub fn theta_two(
    problem: &SharingProblem,
    steps: &StepSizes,
    start: &[DVector<f64>],
    reference: &ReferenceSolution,
) -> Result<f64> {
    theta_one(problem, steps, start, reference)
}

/// `K·(‖(H ⊗ I)ȳ‖ + ‖y*‖·d_K(Σ R_i ξ̄_i - r_i))` for the static method.
pub fn theorem1_lhs(
    problem: &SharingProblem,
    graph: &GraphRound,
    k: usize,
    primal_avg: &[DVector<f64>],
    dual_avg: &DMatrix<f64>,
    dual_norm: f64,
) -> Result<f64> {
    let violation = problem.cone().dist(&problem.constraint_image(primal_avg))?;
    Ok(k as f64 * (incidence_norm(graph, dual_avg) + dual_norm * violation))
}

/// `C = 16 N² B² Γ γ`.
pub fn mixing_constant(agents: usize, dual_bound: f64, gamma_big: f64, gamma: f64) -> f64 {
    16.0 * (agents as f64).powi(2) * dual_bound.powi(2) * gamma_big * gamma
}

/// `C Σ_{k=1..K} α^{q_{k-1}} k(k+1)` with `q` from the budget rule.
pub fn theta_three(constant: f64, alpha: f64, rule: &BudgetRule, iterations: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut sum = 0.0;
    for k in 1..=iterations {
        let q = rule.rounds(k - 1)? as f64;
        sum += alpha.powf(q) * (k * (k + 1)) as f64;
    }
    Ok(constant * sum)
}

/// `C(1/c + 1/(c+1) + 2)`, the bound on every partial sum under the
/// logarithmic rule.
pub fn theta_three_limit(constant: f64, c: f64) -> f64 {
    constant * (1.0 / c + 1.0 / (c + 1.0) + 2.0)
}

/// Certificate quantities at one averaged iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct Theorem2Point {
    pub k: usize,
    /// `d_C(ȳ) + ‖y*‖·d_K(Σ R_i ξ̄_i - r_i)`.
    pub violation: f64,
    /// `φ(ξ̄) - φ* + ‖y*‖·d_K(…)`.
    pub gap: f64,
    pub product: f64,
    pub bound: Option<f64>,
}

impl Theorem2Point {
    /// `None` when no bound was supplied.
    pub fn holds(&self) -> Option<bool> {
        self.bound.map(|b| self.violation <= b)
    }
}

pub fn theorem2_point(
    problem: &SharingProblem,
    snapshot: &ErgodicSnapshot,
    reference: &ReferenceSolution,
    bound_numerator: Option<f64>,
) -> Result<Theorem2Point> {
    let yn = reference.dual.norm();
    let cone_gap = problem.cone().dist(&problem.constraint_image(&snapshot.primal))?;
    let violation = consensus_distance(&snapshot.dual) + yn * cone_gap;
    let gap = problem.objective_finite(&snapshot.primal) - reference.objective + yn * cone_gap;
    let k = snapshot.k;
    Ok(Theorem2Point {
        k,
        violation,
        gap,
        product: k as f64 * violation,
        bound: bound_numerator.map(|num| num / k as f64),
    })
}

/// Evaluates every snapshot. `theta3`, when given, maps `K` to `Θ₃(K)`; the
/// bound is then `(Θ₂ + Θ₃(K))/K`.
pub fn theorem2_certificate(
    problem: &SharingProblem,
    snapshots: &[ErgodicSnapshot],
    reference: &ReferenceSolution,
    theta2: f64,
    theta3: Option<&dyn Fn(usize) -> Result<f64>>,
) -> Result<Vec<Theorem2Point>> {
    snapshots
        .iter()
        .map(|s| {
            let numerator = match theta3 {
                Some(f) => Some(theta2 + f(s.k)?),
                None => None,
            };
            theorem2_point(problem, s, reference, numerator)
        })
        .collect()
}
