use nalgebra::{DMatrix, DVector};

use super::steps::{validate_step_sizes, ConsensusStep, StepRule, StepSizes};
use super::trace::{Observer, Recorder, RunOptions, RunTrace};
use super::{check_start, primal_step, SharingProblem};
use crate::error::{check_dim, Error, Result};
use crate::graphs::GraphRound;

/// Runs the static-graph method for `opts.iterations` iterations from
/// `y⁰ = s⁰ = 0`. Each iteration uses one neighbor exchange of `s`.
pub fn dpda_s_run(
    problem: &SharingProblem,
    graph: &GraphRound,
    steps: &StepSizes,
    start: &[DVector<f64>],
    opts: &RunOptions,
    observer: Option<Observer<'_>>,
) -> Result<RunTrace> {
    if graph.is_directed() {
        return Err(Error::InvalidArgument("the static method needs an undirected graph".into()));
    }
    let n = problem.agent_count();
    check_dim(n, graph.node_count())?;
    check_start(problem, start)?;
    let neighbors = graph.neighbors();
    let degrees: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    validate_step_sizes(problem, steps, &StepRule::Static { degrees }, opts.strict_steps, false)?.into_result()?;
    let gamma = match steps.consensus {
        ConsensusStep::Global(g) => g,
        ConsensusStep::PerAgent(_) => unreachable!("rejected by validation"),
    };

    let m = problem.coupling_dim();
    let cone = problem.cone();
    let mut xi: Vec<DVector<f64>> = start.to_vec();
    let mut y = DMatrix::zeros(m, n);
    let mut s = DMatrix::zeros(m, n);
    let mut rec = Recorder::new(problem, opts, (m, n), observer);

    for k in 1..=opts.iterations {
        let mut xi_next = Vec::with_capacity(n);
        let mut y_next = DMatrix::zeros(m, n);
        for (i, agent) in problem.agents().iter().enumerate() {
            let x_new = primal_step(agent, &xi[i], y.column(i), steps.primal[i]);
            let extrapolated = &x_new * 2.0 - &xi[i];

            let mut col = y.column(i).into_owned();
            let kappa = steps.dual[i];
            col.gemv(kappa, agent.coupling(), &extrapolated, 1.0);
            col.axpy(-kappa, agent.offset(), 1.0);
            for &j in &neighbors[i] {
                col.axpy(kappa * gamma, &s.column(j), 1.0);
                col.axpy(-kappa * gamma, &s.column(i), 1.0);
            }
            cone.project_polar_in_place(col.as_mut_slice());
            y_next.set_column(i, &col);
            xi_next.push(x_new);
        }
        s += &y_next * 2.0 - &y;
        xi = xi_next;
        y = y_next;
        rec.record(k, k, &xi, &y, None, None);
    }
    Ok(rec.finish(opts.iterations, opts.iterations, xi, y, None))
}
