use std::fmt;

use nalgebra::DMatrix;

use super::problem::SharingProblem;
use crate::error::{check_dim, Error, Result};

/// Relative slack allowed when checking a non-strict step inequality.
pub const EQUALITY_SLACK: f64 = 1e-12;

/// Consensus step: one `γ` shared by all agents, or one `γ_i` per agent.
#[derive(Debug, Clone, PartialEq)]
pub enum ConsensusStep {
    Global(f64),
    PerAgent(Vec<f64>),
}

impl ConsensusStep {
    pub fn for_agent(&self, i: usize) -> f64 {
        match self {
            ConsensusStep::Global(g) => *g,
            ConsensusStep::PerAgent(g) => g[i],
        }
    }
}

/// Primal steps `τ_i`, dual steps `κ_i` and the consensus step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSizes {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub consensus: ConsensusStep,
}

impl StepSizes {
    /// Static-graph defaults: `γ = 2N/|E|`, `τ_i = 1/‖R_i‖`,
    /// `κ_i = 1/(2γd_i + ‖R_i‖)`.
    pub fn static_default(problem: &SharingProblem, degrees: &[usize], edge_count: usize) -> Result<Self> {
        check_dim(problem.agent_count(), degrees.len())?;
        if edge_count == 0 {
            return Err(Error::InvalidArgument("static steps need at least one edge".into()));
        }
        let gamma = 2.0 * problem.agent_count() as f64 / edge_count as f64;
        let norms = positive_norms(problem)?;
        Ok(Self {
            primal: norms.iter().map(|r| 1.0 / r).collect(),
            dual: norms.iter().zip(degrees).map(|(r, &d)| 1.0 / (2.0 * gamma * d as f64 + r)).collect(),
            consensus: ConsensusStep::Global(gamma),
        })
    }

    /// Time-varying defaults: `γ = 1`, `τ_i = 1/(N‖R_i‖)`, `κ_i = 1/(γ + ‖R_i‖/N)`.
    /// `dual_factor < 1` backs the dual steps off for the strict condition.
    pub fn dynamic_default(problem: &SharingProblem, dual_factor: f64) -> Result<Self> {
        if !(dual_factor > 0.0 && dual_factor <= 1.0) {
            return Err(Error::InvalidArgument(format!("dual step factor must lie in (0, 1], got {dual_factor}")));
        }
        let n = problem.agent_count() as f64;
        let gamma = 1.0;
        let norms = positive_norms(problem)?;
        Ok(Self {
            primal: norms.iter().map(|r| 1.0 / (n * r)).collect(),
            dual: norms.iter().map(|r| dual_factor / (gamma + r / n)).collect(),
            consensus: ConsensusStep::Global(gamma),
        })
    }

    /// Per-agent recipe `τ_i = 1/(c_i + L_i)`, `κ_i = factor·c_i/(γ_i + ‖R_i‖²)`.
    pub fn balanced(problem: &SharingProblem, c: &[f64], consensus: ConsensusStep, factor: f64) -> Result<Self> {
        check_dim(problem.agent_count(), c.len())?;
        let (primal, dual) = problem
            .agents()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let g = consensus.for_agent(i);
                (1.0 / (c[i] + a.lipschitz()), factor * c[i] / (g + a.op_norm().powi(2)))
            })
            .unzip();
        Ok(Self { primal, dual, consensus })
    }
}

fn positive_norms(problem: &SharingProblem) -> Result<Vec<f64>> {
    problem
        .agents()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if a.op_norm() > 0.0 {
                Ok(a.op_norm())
            } else {
                Err(Error::InvalidArgument(format!("agent {i} has a zero coupling matrix")))
            }
        })
        .collect()
}

/// Which step inequality applies.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// `(1/τ_i - L_i)(1/κ_i - 2γd_i) ≥ ‖R_i‖²` with node degrees `d_i`.
    Static { degrees: Vec<usize> },
    /// `(1/τ_i - L_i)(1/κ_i - γ_i) > ‖R_i‖²`, `τ_i < 1/L_i`, `κ_i < 1/γ_i`.
    Dynamic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentViolation {
    pub agent: usize,
    pub primal_factor: f64,
    pub dual_factor: f64,
    pub norm_squared: f64,
}

impl fmt::Display for AgentViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "agent {}: ({:.6e})·({:.6e}) vs ‖R‖² = {:.6e}",
            self.agent, self.primal_factor, self.dual_factor, self.norm_squared
        )
    }
}

/// Outcome of a step-size check.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub strict: bool,
    pub violations: Vec<AgentViolation>,
    /// Smallest eigenvalue of the assembled block matrix, when requested.
    pub min_eigenvalue: Option<f64>,
    pub invalid_input: Option<String>,
}

impl StepReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty() && self.invalid_input.is_none() && self.eigen_ok()
    }

    fn eigen_ok(&self) -> bool {
        match self.min_eigenvalue {
            None => true,
            Some(e) if self.strict => e > 0.0,
            Some(e) => e >= -1e-9,
        }
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::StepSize(self))
        }
    }
}

impl fmt::Display for StepReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(msg) = &self.invalid_input {
            return write!(f, "{msg}");
        }
        let kind = if self.strict { "strict" } else { "non-strict" };
        if self.violations.is_empty() {
            write!(f, "{kind} condition holds")?;
        } else {
            write!(f, "{kind} condition fails for ")?;
            for (i, v) in self.violations.iter().enumerate() {
                if i > 0 {
                    write!(f, "; ")?;
                }
                write!(f, "{v}")?;
            }
        }
        if let Some(e) = self.min_eigenvalue {
            write!(f, " (block matrix min eigenvalue {e:.3e})")?;
        }
        Ok(())
    }
}

/// Checks the per-agent step inequality. With `assemble` set (time-varying
/// rule only) the full block matrix is also built and its smallest eigenvalue
/// reported; keep that to small instances.
pub fn validate_step_sizes(
    problem: &SharingProblem,
    steps: &StepSizes,
    rule: &StepRule,
    strict: bool,
    assemble: bool,
) -> Result<StepReport> {
    let n = problem.agent_count();
    check_dim(n, steps.primal.len())?;
    check_dim(n, steps.dual.len())?;
    if let ConsensusStep::PerAgent(g) = &steps.consensus {
        check_dim(n, g.len())?;
    }
    let mut report = StepReport { strict, violations: Vec::new(), min_eigenvalue: None, invalid_input: None };

    let positive = |x: &f64| *x > 0.0 && x.is_finite();
    let gammas_ok = match &steps.consensus {
        ConsensusStep::Global(g) => positive(g),
        ConsensusStep::PerAgent(g) => g.iter().all(positive),
    };
    if !steps.primal.iter().all(positive) || !steps.dual.iter().all(positive) || !gammas_ok {
        report.invalid_input = Some("step sizes must be positive and finite".into());
        return Ok(report);
    }
    if let (StepRule::Static { degrees }, ConsensusStep::PerAgent(_)) = (rule, &steps.consensus) {
        let _ = degrees;
        report.invalid_input = Some("static rule needs a single consensus step".into());
        return Ok(report);
    }
    if let StepRule::Static { degrees } = rule {
        check_dim(n, degrees.len())?;
    }

    for (i, a) in problem.agents().iter().enumerate() {
        let gamma = steps.consensus.for_agent(i);
        let primal_factor = 1.0 / steps.primal[i] - a.lipschitz();
        let dual_factor = match rule {
            StepRule::Static { degrees } => 1.0 / steps.dual[i] - 2.0 * gamma * degrees[i] as f64,
            StepRule::Dynamic => 1.0 / steps.dual[i] - gamma,
        };
        let norm_squared = a.op_norm().powi(2);
        let product = primal_factor * dual_factor;
        let holds = if strict {
            primal_factor > 0.0 && dual_factor > 0.0 && product > norm_squared
        } else {
            primal_factor > 0.0 && dual_factor > 0.0 && product >= norm_squared * (1.0 - EQUALITY_SLACK)
        };
        if !holds {
            report.violations.push(AgentViolation { agent: i, primal_factor, dual_factor, norm_squared });
        }
    }

    if assemble && matches!(rule, StepRule::Dynamic) {
        report.min_eigenvalue = Some(block_matrix(problem, steps).symmetric_eigenvalues().min());
    }
    Ok(report)
}

/// `[[D, -Tᵀ], [-T, D_κ]]` with `D = diag((1/τ_i - L_i)I, (1/γ_i)I)`,
/// `T = [blkdiag(R_i), -I]` and `D_κ = diag((1/κ_i)I)`.
pub fn block_matrix(problem: &SharingProblem, steps: &StepSizes) -> DMatrix<f64> {
    let m = problem.coupling_dim();
    let agents = problem.agents();
    let n_agents = agents.len();
    let n = problem.total_dim();
    let size = n + 2 * m * n_agents;
    let mut q = DMatrix::zeros(size, size);

    let mut col = 0;
    for (i, a) in agents.iter().enumerate() {
        let d = 1.0 / steps.primal[i] - a.lipschitz();
        for j in 0..a.dim() {
            q[(col + j, col + j)] = d;
        }
        let row = n + m * n_agents + i * m;
        for r in 0..m {
            for c in 0..a.dim() {
                let v = a.coupling()[(r, c)];
                q[(row + r, col + c)] = -v;
                q[(col + c, row + r)] = -v;
            }
        }
        col += a.dim();
    }
    for i in 0..n_agents {
        let gamma = steps.consensus.for_agent(i);
        let kappa = steps.dual[i];
        for r in 0..m {
            let v_idx = n + i * m + r;
            let y_idx = n + m * n_agents + i * m + r;
            q[(v_idx, v_idx)] = 1.0 / gamma;
            q[(y_idx, y_idx)] = 1.0 / kappa;
            // -T contains +I against the v block.
            q[(y_idx, v_idx)] = 1.0;
            q[(v_idx, y_idx)] = 1.0;
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::Cone;
    use crate::prox::ProxOracle;
    use crate::solver::problem::{AgentData, SmoothTerm};
    use nalgebra::DVector;

    fn single(norm: f64, lipschitz: f64) -> SharingProblem {
        let smooth = if lipschitz > 0.0 {
            SmoothTerm::Quadratic { hessian: DMatrix::from_element(1, 1, lipschitz), linear: DVector::zeros(1) }
        } else {
            SmoothTerm::Zero
        };
        let a = AgentData::new(DMatrix::from_element(1, 1, norm), DVector::zeros(1), smooth, ProxOracle::Zero).unwrap();
        SharingProblem::new(Cone::NonnegOrthant(1), vec![a]).unwrap()
    }

    #[test]
    fn arithmetic_example() {
        let p = single(1.0, 0.0);
        let s = StepSizes { primal: vec![0.5], dual: vec![0.4], consensus: ConsensusStep::Global(1.0) };
        let rep = validate_step_sizes(&p, &s, &StepRule::Dynamic, true, true).unwrap();
        assert!(rep.is_ok(), "{rep}");
        assert!(rep.min_eigenvalue.unwrap() > 0.0);
    }

    #[test]
    fn balanced_recipe_is_strict() {
        for (norm, l, g) in [(1.0, 0.0, 1.0), (3.0, 2.5, 0.2), (0.1, 10.0, 7.0)] {
            let p = single(norm, l);
            let s = StepSizes::balanced(&p, &[1.0], ConsensusStep::Global(g), 0.9).unwrap();
            assert!(validate_step_sizes(&p, &s, &StepRule::Dynamic, true, true).unwrap().is_ok());
        }
    }

    #[test]
    fn equality_boundary_has_zero_eigenvalue() {
        let mut rng = crate::seed::stream(5, 0, "boundary");
        use rand::Rng;
        let agents: Vec<AgentData> = (0..2)
            .map(|_| {
                let r = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.0..1.0));
                AgentData::new(r, DVector::zeros(2), SmoothTerm::Zero, ProxOracle::L1Norm).unwrap()
            })
            .collect();
        let p = SharingProblem::new(Cone::NonnegOrthant(2), agents).unwrap();
        let gamma = 0.7;
        let primal = vec![0.5, 0.25];
        let dual = p
            .agents()
            .iter()
            .zip(&primal)
            .map(|(a, t)| 1.0 / (gamma + a.op_norm().powi(2) / (1.0 / t)))
            .collect();
        let s = StepSizes { primal, dual, consensus: ConsensusStep::Global(gamma) };
        let loose = validate_step_sizes(&p, &s, &StepRule::Dynamic, false, true).unwrap();
        assert!(loose.is_ok(), "{loose}");
        let e = loose.min_eigenvalue.unwrap();
        assert!(e >= -1e-9 && e <= 1e-9, "min eigenvalue {e}");
        let strict = validate_step_sizes(&p, &s, &StepRule::Dynamic, true, true).unwrap();
        assert!(!strict.is_ok());
    }

    #[test]
    fn defaults_sit_on_the_boundary() {
        let p = single(2.0, 0.0);
        let s = StepSizes::static_default(&p, &[0], 1).unwrap();
        let rule = StepRule::Static { degrees: vec![0] };
        assert!(validate_step_sizes(&p, &s, &rule, false, false).unwrap().is_ok());
        let d = StepSizes::dynamic_default(&p, 1.0).unwrap();
        assert!(validate_step_sizes(&p, &d, &StepRule::Dynamic, false, false).unwrap().is_ok());
        assert!(!validate_step_sizes(&p, &d, &StepRule::Dynamic, true, false).unwrap().is_ok());
        let d = StepSizes::dynamic_default(&p, 0.9).unwrap();
        assert!(validate_step_sizes(&p, &d, &StepRule::Dynamic, true, false).unwrap().is_ok());
    }

    #[test]
    fn rejects_bad_input() {
        let p = single(1.0, 0.0);
        let s = StepSizes { primal: vec![-0.5], dual: vec![0.4], consensus: ConsensusStep::Global(1.0) };
        let rep = validate_step_sizes(&p, &s, &StepRule::Dynamic, true, false).unwrap();
        assert!(!rep.is_ok());
        assert!(matches!(rep.into_result(), Err(Error::StepSize(_))));
        let s = StepSizes { primal: vec![0.5, 0.5], dual: vec![0.4], consensus: ConsensusStep::Global(1.0) };
        assert!(validate_step_sizes(&p, &s, &StepRule::Dynamic, true, false).is_err());
    }
}
