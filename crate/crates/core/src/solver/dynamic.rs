use nalgebra::{DMatrix, DVector};

use super::steps::{validate_step_sizes, ConsensusStep, StepRule, StepSizes};
use super::trace::{Observer, Recorder, RunOptions, RunTrace};
use super::{check_start, primal_step, SharingProblem};
use crate::error::{check_dim, Error, Result};
use crate::mixing::{exact_consensus_projection, ConsensusMixer};

/// Runs the time-varying method from `v⁰ = y⁰ = 0`, calling `mixer` once per
/// iteration. With per-agent consensus steps the mixer must carry the same
/// weights.
pub fn dpda_d_run(
    problem: &SharingProblem,
    mixer: &mut ConsensusMixer,
    steps: &StepSizes,
    start: &[DVector<f64>],
    opts: &RunOptions,
    observer: Option<Observer<'_>>,
) -> Result<RunTrace> {
    let n = problem.agent_count();
    let m = problem.coupling_dim();
    let geom = mixer.geometry().clone();
    check_dim(m, geom.block_dim)?;
    check_dim(n, geom.agents)?;
    check_start(problem, start)?;
    match (&steps.consensus, &geom.weights) {
        (ConsensusStep::Global(_), None) => {}
        (ConsensusStep::PerAgent(g), Some(w)) if g == w => {}
        _ => {
            return Err(Error::InvalidArgument(
                "per-agent consensus steps and mixing weights must match".into(),
            ))
        }
    }
    validate_step_sizes(problem, steps, &StepRule::Dynamic, opts.strict_steps, false)?.into_result()?;

    let radius = geom.radius();
    let cone = problem.cone();
    let gammas: Vec<f64> = (0..n).map(|i| steps.consensus.for_agent(i)).collect();
    let mut xi: Vec<DVector<f64>> = start.to_vec();
    let mut y = DMatrix::zeros(m, n);
    let mut v = DMatrix::zeros(m, n);
    let mut comms = 0;
    let mut rec = Recorder::new(problem, opts, (m, n), observer);

    for k in 1..=opts.iterations {
        let mut centered = v.clone();
        for (i, g) in gammas.iter().enumerate() {
            let mut col = centered.column_mut(i);
            col /= *g;
            col += y.column(i);
        }
        let (mixed, rounds) = mixer.apply(k - 1, &centered)?;
        comms += rounds;
        let mixing_error = if opts.record_mixing_error {
            Some((&mixed - exact_consensus_projection(&geom, &centered)?).norm())
        } else {
            None
        };
        let mut v_next = centered - mixed;
        for (i, g) in gammas.iter().enumerate() {
            v_next.column_mut(i).scale_mut(*g);
        }

        let mut xi_next = Vec::with_capacity(n);
        let mut y_next = DMatrix::zeros(m, n);
        for (i, agent) in problem.agents().iter().enumerate() {
            let x_new = primal_step(agent, &xi[i], y.column(i), steps.primal[i]);
            let extrapolated = &x_new * 2.0 - &xi[i];
            let kappa = steps.dual[i];
            let mut col = y.column(i).into_owned();
            col.gemv(kappa, agent.coupling(), &extrapolated, 1.0);
            col.axpy(-2.0 * kappa, &v_next.column(i), 1.0);
            col.axpy(kappa, &v.column(i), 1.0);
            col.axpy(-kappa, agent.offset(), 1.0);
            cone.project_polar_ball_in_place(radius, col.as_mut_slice());
            y_next.set_column(i, &col);
            xi_next.push(x_new);
        }
        xi = xi_next;
        y = y_next;
        v = v_next;
        rec.record(k, comms, &xi, &y, Some(&v), mixing_error);
    }
    Ok(rec.finish(opts.iterations, comms, xi, y, Some(v)))
}
