//! One replication: problem, network, reference, dual bound, solver run.

use dpda::baseline::{prox_jadmm_run, ProxJadmmConfig};
use dpda::dualbound::dual_bound;
use dpda::graphs::{gen_schedule, gen_small_world, static_schedule, twelve_node_digraph};
use dpda::metrics::{Cadence, Infeasibility, MetricContext, MetricRow};
use dpda::mixing::{ConsensusGeometry, ConsensusMixer, MixingBudget, Protocol};
use dpda::problems::{
    bpd_slater_certificate, bpd_to_sharing, even_partition, gen_bpd, reference_solution, uniform_start, BpdInstance,
};
use dpda::seed::{derive_seed, stream};
use dpda::solver::{
    centralized_pda_run, dpda_d_run, dpda_s_run, validate_step_sizes, CentralizedSteps, ConsensusStep,
    ReferenceSolution, RunOptions, SharingProblem, StepRule, StepSizes,
};
use dpda::{GraphRound, GraphSchedule};
use log::{debug, info};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Algorithm, BoundSetting, BoundSource, ExperimentConfig, Scenario};
use crate::error::HarnessError;

/// Dual steps are scaled by this factor when the strict inequality is requested.
const STRICT_BACKOFF: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicationSeeds {
    pub problem: u64,
    pub network: u64,
    pub schedule: u64,
    pub start: u64,
}

impl ReplicationSeeds {
    pub fn derive(master: u64, rep: usize) -> Self {
        let rep = rep as u64;
        Self {
            problem: derive_seed(master, rep, "problem"),
            network: derive_seed(master, rep, "network"),
            schedule: derive_seed(master, rep, "schedule"),
            start: derive_seed(master, rep, "start"),
        }
    }
}

/// Everything a replication needs before the solver starts.
#[derive(Debug, Clone)]
pub struct Setup {
    pub rep: usize,
    pub seeds: ReplicationSeeds,
    pub instance: BpdInstance,
    pub partition: Vec<usize>,
    pub problem: SharingProblem,
    pub network: Option<GraphSchedule>,
    pub start: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub rep: usize,
    pub seeds: ReplicationSeeds,
    pub dual_bound: Option<f64>,
    pub reference_objective: f64,
    pub rows: Vec<MetricRow>,
}

pub fn setup(cfg: &ExperimentConfig, rep: usize) -> Result<Setup, HarnessError> {
    let seeds = ReplicationSeeds::derive(cfg.run.seed, rep);
    let p = &cfg.problem;
    let instance = gen_bpd(p.n, p.m, p.kappa, p.snr(), p.alpha, seeds.problem)?;
    let agents = cfg.agents();
    let partition = match &p.partition {
        Some(part) => part.clone(),
        None => even_partition(p.n, agents)?,
    };
    let problem = bpd_to_sharing(&instance, &partition)?;
    let network = if uses_network(cfg.algorithm) { Some(network(cfg, &seeds)?) } else { None };
    let start = uniform_start(&problem, &mut stream(cfg.run.seed, rep as u64, "start"));
    Ok(Setup { rep, seeds, instance, partition, problem, network, start })
}

fn uses_network(algorithm: Algorithm) -> bool {
    matches!(algorithm, Algorithm::DpdaS | Algorithm::DpdaD | Algorithm::DpdaDGammaI)
}

fn network(cfg: &ExperimentConfig, seeds: &ReplicationSeeds) -> Result<GraphSchedule, HarnessError> {
    let net = &cfg.network;
    let base = match &net.base_graph {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            GraphRound::from_edge_list(&text)
                .map_err(|e| HarnessError::Config(format!("network.base_graph {}: {e}", path.display())))?
        }
        None if cfg.scenario == Scenario::DynamicDirected => twelve_node_digraph(),
        None => gen_small_world(cfg.agents(), net.edges, seeds.network)?,
    };
    let directed = cfg.scenario == Scenario::DynamicDirected;
    if base.is_directed() != directed {
        return Err(HarnessError::Config(format!(
            "network.base_graph: scenario {:?} needs a {} graph",
            cfg.scenario,
            if directed { "directed" } else { "undirected" }
        )));
    }
    if base.node_count() != cfg.agents() {
        return Err(HarnessError::Config(format!(
            "network.agents: base graph has {} nodes, expected {}",
            base.node_count(),
            cfg.agents()
        )));
    }
    Ok(match cfg.scenario {
        Scenario::StaticUndirected => static_schedule(base)?,
        _ => gen_schedule(base, net.window, net.fraction, seeds.schedule)?,
    })
}

/// Step sizes of the selected distributed method, before any run.
pub fn step_sizes(cfg: &ExperimentConfig, setup: &Setup) -> Result<Option<(StepSizes, StepRule)>, HarnessError> {
    let problem = &setup.problem;
    let s = &cfg.steps;
    let factor = if s.strict { STRICT_BACKOFF } else { 1.0 };
    let n = problem.agent_count() as f64;
    let norms: Vec<f64> = problem.agents().iter().map(|a| a.op_norm()).collect();
    let (mut steps, rule) = match cfg.algorithm {
        Algorithm::DpdaS => {
            let graph = setup.network.as_ref().expect("network built for dpda-s").base();
            let degrees = graph.degrees();
            let mut steps = StepSizes::static_default(problem, &degrees, graph.edge_count())?;
            if let Some(g) = s.gamma {
                steps.consensus = ConsensusStep::Global(g);
                steps.dual = norms.iter().zip(&degrees).map(|(r, &d)| 1.0 / (2.0 * g * d as f64 + r)).collect();
            }
            steps.dual.iter_mut().for_each(|k| *k *= factor);
            (steps, StepRule::Static { degrees })
        }
        Algorithm::DpdaD => {
            let mut steps = StepSizes::dynamic_default(problem, factor)?;
            if let Some(g) = s.gamma {
                steps.consensus = ConsensusStep::Global(g);
                steps.dual = norms.iter().map(|r| factor / (g + r / n)).collect();
            }
            (steps, StepRule::Dynamic)
        }
        Algorithm::DpdaDGammaI => {
            let gammas = s.gamma_i.clone().unwrap_or_else(|| norms.clone());
            let steps = StepSizes {
                primal: norms.iter().map(|r| 1.0 / (n * r)).collect(),
                dual: norms.iter().zip(&gammas).map(|(r, g)| factor / (g + r / n)).collect(),
                consensus: ConsensusStep::PerAgent(gammas),
            };
            (steps, StepRule::Dynamic)
        }
        Algorithm::ProxJadmm | Algorithm::CentralizedPda => return Ok(None),
    };
    if let Some(tau) = &s.primal {
        steps.primal = tau.clone();
    }
    if let Some(kappa) = &s.dual {
        steps.dual = kappa.clone();
    }
    Ok(Some((steps, rule)))
}

/// Checks the step inequality for replication 0 without running anything.
pub fn check_steps(cfg: &ExperimentConfig) -> Result<(), HarnessError> {
    let setup = setup(cfg, 0)?;
    if let Some((steps, rule)) = step_sizes(cfg, &setup)? {
        validate_step_sizes(&setup.problem, &steps, &rule, cfg.steps.strict, false)?.into_result()?;
    }
    Ok(())
}

/// Dual bound `B` for the configured source.
pub fn resolve_bound(cfg: &ExperimentConfig, setup: &Setup, reference: &ReferenceSolution) -> Result<f64, HarnessError> {
    let source = match cfg.steps.bound {
        BoundSetting::Value(b) => return Ok(b),
        BoundSetting::Named(BoundSource::Auto) if setup.instance.is_noise_free() => BoundSource::AutoReference,
        BoundSetting::Named(BoundSource::Auto) => BoundSource::AutoSlater,
        BoundSetting::Named(source) => source,
    };
    Ok(match source {
        BoundSource::AutoSlater => {
            let cert = bpd_slater_certificate(&setup.instance, &setup.partition, &setup.problem)?;
            dual_bound(&cert, setup.problem.cone())?
        }
        _ => (2.0 * reference.dual.norm()).max(f64::MIN_POSITIVE),
    })
}

/// Iteration count, cadence and metric context of a replication.
pub fn run_options(cfg: &ExperimentConfig, setup: &Setup, reference: &ReferenceSolution) -> RunOptions {
    RunOptions {
        cadence: Cadence { dense_until: cfg.run.dense_until, stride: cfg.run.stride },
        strict_steps: cfg.steps.strict,
        record_timing: cfg.run.record_timing,
        ..RunOptions::new(cfg.run.iterations)
    }
    .with_metrics(MetricContext {
        reference_objective: reference.objective,
        infeasibility: Infeasibility::BallExcess { dims: setup.instance.m, radius: setup.instance.eps },
    })
}

/// Gossip mixer over the replication's schedule with dual bound `bound`.
pub fn mixer(cfg: &ExperimentConfig, setup: &Setup, steps: &StepSizes, bound: f64) -> Result<ConsensusMixer, HarnessError> {
    let mut geom = ConsensusGeometry::new(setup.problem.coupling_dim(), setup.problem.agent_count(), bound)?;
    if let ConsensusStep::PerAgent(g) = &steps.consensus {
        geom = geom.with_weights(g.clone())?;
    }
    let schedule = setup.network.clone().ok_or_else(|| HarnessError::Config(format!("{:?} has no network", cfg.algorithm)))?;
    let protocol = if schedule.is_directed() { Protocol::PushSum(schedule) } else { Protocol::Undirected(schedule) };
    Ok(ConsensusMixer::new(geom, protocol, MixingBudget::new(cfg.budget.rule())?)?)
}

pub fn run_replication(cfg: &ExperimentConfig, rep: usize) -> Result<Replication, HarnessError> {
    let setup = setup(cfg, rep)?;
    let steps = step_sizes(cfg, &setup)?;
    if let Some((steps, rule)) = &steps {
        // Abort before the reference solve when the steps are unusable.
        validate_step_sizes(&setup.problem, steps, rule, cfg.steps.strict, false)?.into_result()?;
    }
    let reference = reference_solution(&setup.problem, cfg.run.reference_tolerance)?;
    debug!("rep {rep}: reference objective {}", reference.objective);
    let opts = run_options(cfg, &setup, &reference);
    let mut bound = None;
    let trace = match (cfg.algorithm, steps) {
        (Algorithm::DpdaS, Some((steps, _))) => {
            let graph = setup.network.as_ref().expect("network built for dpda-s").base();
            dpda_s_run(&setup.problem, graph, &steps, &setup.start, &opts, None)?
        }
        (Algorithm::DpdaD | Algorithm::DpdaDGammaI, Some((steps, _))) => {
            let b = resolve_bound(cfg, &setup, &reference)?;
            bound = Some(b);
            let mut gossip = mixer(cfg, &setup, &steps, b)?;
            dpda_d_run(&setup.problem, &mut gossip, &steps, &setup.start, &opts, None)?
        }
        (Algorithm::CentralizedPda, _) => {
            let steps = CentralizedSteps::balanced(&setup.problem, 1.0)?;
            centralized_pda_run(&setup.problem, steps, &setup.start, None, &opts, None)?
        }
        (Algorithm::ProxJadmm, _) => {
            let config = ProxJadmmConfig::standard(&setup.instance, &setup.partition)?;
            prox_jadmm_run(&setup.instance, &setup.partition, &config, &setup.start, &opts, None)?.trace
        }
        (algorithm, None) => unreachable!("{algorithm:?} always has step sizes"),
    };
    if let Some(last) = trace.rows.last() {
        if !(last.subopt_rel.is_finite() && last.infeas.is_finite()) {
            return Err(HarnessError::Numerical(format!("rep {rep}: metrics are not finite at k = {}", last.k)));
        }
    }
    info!("rep {rep}: done, {} rows", trace.rows.len());
    Ok(Replication { rep, seeds: setup.seeds, dual_bound: bound, reference_objective: reference.objective, rows: trace.rows })
}

/// Runs all replications on the rayon pool; results come back in index order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<Replication>, HarnessError> {
    (0..cfg.run.replications).into_par_iter().map(|rep| run_replication(cfg, rep)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn seed_tags_are_distinct_and_stable() {
        for master in [0u64, 1, 42, u64::MAX] {
            for rep in 0..50 {
                let s = ReplicationSeeds::derive(master, rep);
                let all: HashSet<u64> = [s.problem, s.network, s.schedule, s.start].into_iter().collect();
                assert_eq!(all.len(), 4);
                assert_eq!(s, ReplicationSeeds::derive(master, rep));
            }
        }
    }

    #[test]
    fn ten_thousand_derived_seeds_do_not_collide() {
        let seen: HashSet<u64> = (0..10_000u64).map(|i| derive_seed(7, i, "problem")).collect();
        assert_eq!(seen.len(), 10_000);
    }
}
