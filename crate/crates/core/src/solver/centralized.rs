use log::debug;
use nalgebra::{DMatrix, DVector};

use super::problem::{spectral_norm, ReferenceSolution};
use super::steps::EQUALITY_SLACK;
use super::trace::{Observer, Recorder, RunOptions, RunTrace};
use super::{check_start, primal_step, SharingProblem};
use crate::error::{check_dim, Error, Result};

/// Primal and dual steps of the centralized method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralizedSteps {
    pub primal: f64,
    pub dual: f64,
}

impl CentralizedSteps {
    /// `1/ν_x = L + ‖T‖/ω`, `1/ν_y = ω‖T‖`: the step condition at equality,
    /// with `ω` trading primal against dual progress.
    pub fn balanced(problem: &SharingProblem, weight: f64) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(Error::InvalidArgument(format!("primal weight must be positive, got {weight}")));
        }
        let t = spectral_norm(&problem.stacked_coupling());
        if !(t > 0.0) {
            return Err(Error::InvalidArgument("coupling matrix is zero".into()));
        }
        Ok(Self { primal: 1.0 / (problem.max_lipschitz() + t / weight), dual: 1.0 / (weight * t) })
    }

    /// `(1/ν_x - L)(1/ν_y) ≥ ‖T‖²` with `T = [R_1 … R_N]`.
    pub fn check(&self, problem: &SharingProblem) -> Result<()> {
        let t2 = spectral_norm(&problem.stacked_coupling()).powi(2);
        let lhs = (1.0 / self.primal - problem.max_lipschitz()) * (1.0 / self.dual);
        let ok = self.primal > 0.0
            && self.dual > 0.0
            && 1.0 / self.primal > problem.max_lipschitz()
            && lhs >= t2 * (1.0 - EQUALITY_SLACK);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "centralized step condition fails: {lhs:.6e} < ‖T‖² = {t2:.6e}"
            )))
        }
    }
}

struct Pda<'a> {
    problem: &'a SharingProblem,
    steps: CentralizedSteps,
    offset: DVector<f64>,
}

impl Pda<'_> {
    fn step(&self, x: &[DVector<f64>], y: &DVector<f64>) -> (Vec<DVector<f64>>, DVector<f64>) {
        let mut y_next = y.clone();
        let mut x_next = Vec::with_capacity(x.len());
        for (agent, xi) in self.problem.agents().iter().zip(x) {
            let xn = primal_step(agent, xi, y.column(0), self.steps.primal);
            let extrapolated = &xn * 2.0 - xi;
            y_next.gemv(self.steps.dual, agent.coupling(), &extrapolated, 1.0);
            x_next.push(xn);
        }
        y_next.axpy(-self.steps.dual, &self.offset, 1.0);
        self.problem.cone().project_polar_in_place(y_next.as_mut_slice());
        (x_next, y_next)
    }

    /// Scaled fixed-point residual `‖((x - x⁺)/ν_x, (y - y⁺)/ν_y)‖`.
    fn residual(&self, x: &[DVector<f64>], y: &DVector<f64>) -> f64 {
        let (xn, yn) = self.step(x, y);
        let dx: f64 = x.iter().zip(&xn).map(|(a, b)| (a - b).norm_squared()).sum();
        let dy = (y - yn).norm_squared();
        (dx / self.steps.primal.powi(2) + dy / self.steps.dual.powi(2)).sqrt()
    }
}

/// Plain primal-dual iterations on the centralized saddle problem. The dual is
/// a single column.
pub fn centralized_pda_run(
    problem: &SharingProblem,
    steps: CentralizedSteps,
    start: &[DVector<f64>],
    start_dual: Option<&DVector<f64>>,
    opts: &RunOptions,
    observer: Option<Observer<'_>>,
) -> Result<RunTrace> {
    check_start(problem, start)?;
    steps.check(problem)?;
    let m = problem.coupling_dim();
    let pda = Pda { problem, steps, offset: problem.total_offset() };
    let mut x = start.to_vec();
    let mut y = match start_dual {
        Some(y0) => {
            check_dim(m, y0.len())?;
            y0.clone()
        }
        None => DVector::zeros(m),
    };
    let mut rec = Recorder::new(problem, opts, (m, 1), observer);
    for k in 1..=opts.iterations {
        let (xn, yn) = pda.step(&x, &y);
        x = xn;
        y = yn;
        rec.record(k, 0, &x, &DMatrix::from_column_slice(m, 1, y.as_slice()), None, None);
    }
    let dual = DMatrix::from_column_slice(m, 1, y.as_slice());
    Ok(rec.finish(opts.iterations, 0, x, dual, None))
}

/// Stopping and restart parameters for [`restarted_pda`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartSettings {
    /// Target for the scaled residual divided by `1 + ‖Σr_i‖`.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub check_every: usize,
    /// Restart once the candidate's residual falls below this fraction of the
    /// residual at the previous restart.
    pub shrink: f64,
    /// Forced restart after this many iterations without one.
    pub max_epoch: usize,
    pub primal_weight: f64,
}

impl Default for RestartSettings {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_iterations: 2_000_000, check_every: 64, shrink: 0.2, max_epoch: 20_000, primal_weight: 1.0 }
    }
}

/// Primal-dual iterations restarted from the epoch average or the current
/// iterate, whichever has the smaller residual. Stops once the residual meets
/// the tolerance.
pub fn restarted_pda(
    problem: &SharingProblem,
    start: &[DVector<f64>],
    settings: &RestartSettings,
) -> Result<ReferenceSolution> {
    check_start(problem, start)?;
    let steps = CentralizedSteps::balanced(problem, settings.primal_weight)?;
    let offset = problem.total_offset();
    let scale = 1.0 + offset.norm();
    let pda = Pda { problem, steps, offset };
    let m = problem.coupling_dim();

    let mut x = start.to_vec();
    let mut y = DVector::zeros(m);
    let mut restart_res = pda.residual(&x, &y);
    let mut avg_x: Vec<DVector<f64>> = x.clone();
    let mut avg_y = y.clone();
    let mut epoch = 0usize;
    let mut best = (f64::INFINITY, x.clone(), y.clone());

    for it in 1..=settings.max_iterations {
        let (xn, yn) = pda.step(&x, &y);
        x = xn;
        y = yn;
        epoch += 1;
        let w = 1.0 / epoch as f64;
        for (a, xi) in avg_x.iter_mut().zip(&x) {
            *a += (xi - &*a) * w;
        }
        avg_y += (&y - &avg_y) * w;

        if it % settings.check_every.max(1) != 0 {
            continue;
        }
        let res_cur = pda.residual(&x, &y);
        let res_avg = pda.residual(&avg_x, &avg_y);
        let (res, use_avg) = if res_avg < res_cur { (res_avg, true) } else { (res_cur, false) };
        if res < best.0 {
            best = if use_avg { (res, avg_x.clone(), avg_y.clone()) } else { (res, x.clone(), y.clone()) };
        }
        if res / scale <= settings.tolerance {
            debug!("restarted primal-dual converged after {it} iterations (residual {res:.3e})");
            let primal = best.1;
            let objective = problem.objective_finite(&primal);
            return Ok(ReferenceSolution { primal, dual: best.2, objective });
        }
        if res <= settings.shrink * restart_res || epoch >= settings.max_epoch {
            if use_avg {
                x = avg_x.clone();
                y = avg_y.clone();
            }
            restart_res = res;
            avg_x = x.clone();
            avg_y = y.clone();
            epoch = 0;
        }
    }
    Err(Error::NonConvergence { iterations: settings.max_iterations, residual: best.0 / scale })
}
