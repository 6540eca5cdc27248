//! Distributed primal-dual methods for static and time-varying networks, the
//! centralized primal-dual reference method, step-size checks and the error
//! certificates.

mod centralized;
mod certificates;
mod dynamic;
mod problem;
mod static_graph;
mod steps;
mod trace;

pub use centralized::{centralized_pda_run, restarted_pda, CentralizedSteps, RestartSettings};
pub use certificates::{
    mixing_constant, theorem1_lhs, theorem2_certificate, theorem2_point, theta_one, theta_three,
    theta_three_limit, theta_two, Theorem2Point,
};
pub use dynamic::dpda_d_run;
pub use problem::{spectral_norm, AgentData, ReferenceSolution, SharingProblem, SmoothTerm};
pub use static_graph::dpda_s_run;
pub use steps::{
    block_matrix, validate_step_sizes, AgentViolation, ConsensusStep, StepReport, StepRule, StepSizes,
    EQUALITY_SLACK,
};
pub(crate) use trace::Recorder;
pub use trace::{ErgodicSnapshot, IterView, Observer, RunOptions, RunTrace, StoredIterate};

use nalgebra::{DVector, DVectorView};

/// `prox_{τρ}(ξ - τ(∇f(ξ) + Rᵀy))`.
pub(crate) fn primal_step(agent: &AgentData, xi: &DVector<f64>, y: DVectorView<'_, f64>, tau: f64) -> DVector<f64> {
    let mut out = xi.clone();
    out.gemv_tr(-tau, agent.coupling(), &y, 1.0);
    agent.smooth().add_gradient(xi, -tau, &mut out);
    agent.prox().apply_in_place(out.as_mut_slice(), tau);
    out
}

pub(crate) fn check_start(problem: &SharingProblem, start: &[DVector<f64>]) -> crate::Result<()> {
    problem.check_primal(start)?;
    if start.iter().any(|x| x.iter().any(|v| !v.is_finite())) {
        return Err(crate::Error::InvalidArgument("starting point has non-finite entries".into()));
    }
    Ok(())
}
