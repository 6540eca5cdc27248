//! Experiment configuration. Every key is optional except the scenario and the
//! algorithm; the defaults reproduce the desk-scale BPD setup.
//!
//! ```toml
//! scenario = "dynamic-undirected"   # static-undirected | dynamic-undirected | dynamic-directed
//! algorithm = "dpda-d"              # dpda-s | dpda-d | dpda-d-gamma-i | prox-jadmm | centralized-pda
//!
//! [problem]
//! n = 120
//! m = 20
//! kappa = 20
//! snr_db = 30.0      # inf for the noise-free problem
//! alpha = 0.05
//! # partition = [12, 12, ...]   # columns per agent; default is an even split
//!
//! [network]
//! agents = 10        # the directed scenario uses the fixed 12-node digraph
//! edges = 15
//! # base_graph = "graph.txt"    # edge-list file replacing the random draw
//! window = 5
//! fraction = 0.8
//!
//! [steps]
//! bound = "auto"     # auto | auto-slater | auto-reference | <number>
//! strict = false
//! # gamma = 1.0, gamma_i = [...], primal = [...], dual = [...]
//!
//! [budget]
//! rule = "scaled-log"   # scaled-log {scale} | logarithmic {alpha, c} | polynomial {p} | constant {rounds}
//! scale = 10.0
//!
//! [run]
//! iterations = 5000
//! replications = 1
//! seed = 1
//! output = "results"
//! ```

use std::path::{Path, PathBuf};

use dpda::mixing::BudgetRule;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    StaticUndirected,
    DynamicUndirected,
    DynamicDirected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    DpdaS,
    DpdaD,
    DpdaDGammaI,
    ProxJadmm,
    CentralizedPda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub network: NetworkConfig,
    #[serde(default)]
    pub steps: StepsConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProblemConfig {
    pub n: usize,
    pub m: usize,
    pub kappa: usize,
    /// `inf` selects the noise-free problem.
    pub snr_db: f64,
    pub alpha: f64,
    pub partition: Option<Vec<usize>>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { n: 120, m: 20, kappa: 20, snr_db: 30.0, alpha: 0.05, partition: None }
    }
}

impl ProblemConfig {
    pub fn snr(&self) -> Option<f64> {
        self.snr_db.is_finite().then_some(self.snr_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub agents: usize,
    pub edges: usize,
    pub base_graph: Option<PathBuf>,
    pub window: usize,
    pub fraction: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { agents: 10, edges: 15, base_graph: None, window: 5, fraction: 0.8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundSetting {
    Value(f64),
    Named(BoundSource),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSource {
    /// Slater certificate when the problem has noise, reference otherwise.
    Auto,
    AutoSlater,
    /// Twice the norm of the reference dual.
    AutoReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StepsConfig {
    pub bound: BoundSetting,
    pub strict: bool,
    pub gamma: Option<f64>,
    pub gamma_i: Option<Vec<f64>>,
    pub primal: Option<Vec<f64>>,
    pub dual: Option<Vec<f64>>,
}

impl Default for StepsConfig {
    fn default() -> Self {
        Self { bound: BoundSetting::Named(BoundSource::Auto), strict: false, gamma: None, gamma_i: None, primal: None, dual: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BudgetConfig {
    ScaledLog { scale: f64 },
    Logarithmic { alpha: f64, c: f64 },
    Polynomial { p: f64 },
    Constant { rounds: usize },
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self::ScaledLog { scale: 10.0 }
    }
}

impl BudgetConfig {
    pub fn rule(&self) -> BudgetRule {
        match *self {
            Self::ScaledLog { scale } => BudgetRule::ScaledLog { scale },
            Self::Logarithmic { alpha, c } => BudgetRule::Logarithmic { alpha, c },
            Self::Polynomial { p } => BudgetRule::Polynomial { p },
            Self::Constant { rounds } => BudgetRule::Constant(rounds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub iterations: usize,
    pub replications: usize,
    pub seed: u64,
    pub output: PathBuf,
    /// Fills `elapsed_ms`; off by default so reruns are byte-identical.
    pub record_timing: bool,
    pub reference_tolerance: f64,
    pub dense_until: usize,
    pub stride: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            replications: 1,
            seed: 1,
            output: PathBuf::from("results"),
            record_timing: false,
            reference_tolerance: 1e-10,
            dense_until: 2000,
            stride: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative `base_graph` paths resolve against the
    /// config's directory.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let (Some(base), Some(dir)) = (cfg.network.base_graph.as_mut(), path.parent()) {
            if base.is_relative() {
                *base = dir.join(&*base);
            }
        }
        Ok(cfg)
    }

    /// Agent count after the scenario is taken into account.
    pub fn agents(&self) -> usize {
        match self.scenario {
            Scenario::DynamicDirected if self.network.base_graph.is_none() => 12,
            _ => self.network.agents,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |field: &str, msg: String| Err(HarnessError::Config(format!("{field}: {msg}")));
        let p = &self.problem;
        if p.m == 0 || p.m >= p.n {
            return fail("problem.m", format!("need 0 < m < n, got m = {}, n = {}", p.m, p.n));
        }
        if p.kappa == 0 || p.kappa > p.n {
            return fail("problem.kappa", format!("must lie in [1, {}], got {}", p.n, p.kappa));
        }
        if !(p.alpha > 0.0 && p.alpha < 1.0) {
            return fail("problem.alpha", format!("must lie in (0, 1), got {}", p.alpha));
        }
        if p.snr_db.is_nan() || p.snr_db == f64::NEG_INFINITY {
            return fail("problem.snr_db", "must be a number or inf".into());
        }
        let agents = self.agents();
        if agents == 0 || agents > p.n {
            return fail("network.agents", format!("must lie in [1, {}], got {agents}", p.n));
        }
        if let Some(part) = &p.partition {
            if part.len() != agents || part.iter().sum::<usize>() != p.n || part.contains(&0) {
                return fail("problem.partition", format!("needs {agents} positive entries summing to {}", p.n));
            }
        }
        let n = &self.network;
        let max_edges = agents * agents.saturating_sub(1) / 2;
        if n.base_graph.is_none() && self.scenario != Scenario::DynamicDirected && (n.edges + 1 < agents || n.edges > max_edges) {
            return fail("network.edges", format!("must lie in [{}, {max_edges}], got {}", agents.saturating_sub(1), n.edges));
        }
        if n.window == 0 {
            return fail("network.window", "must be positive".into());
        }
        if !(n.fraction > 0.0 && n.fraction <= 1.0) {
            return fail("network.fraction", format!("must lie in (0, 1], got {}", n.fraction));
        }
        match (self.scenario, self.algorithm) {
            (Scenario::StaticUndirected, Algorithm::DpdaD | Algorithm::DpdaDGammaI) => {}
            (_, Algorithm::DpdaS) if self.scenario != Scenario::StaticUndirected => {
                return fail("algorithm", "dpda-s needs scenario static-undirected".into());
            }
            _ => {}
        }
        let s = &self.steps;
        if let BoundSetting::Value(b) = s.bound {
            if !(b > 0.0 && b.is_finite()) {
                return fail("steps.bound", format!("must be positive, got {b}"));
            }
        }
        if matches!(s.bound, BoundSetting::Named(BoundSource::AutoSlater)) && p.snr().is_none() {
            return fail("steps.bound", "auto-slater needs a noisy problem; the noise-free constraint has no interior".into());
        }
        for (field, v) in [("steps.gamma_i", &s.gamma_i), ("steps.primal", &s.primal), ("steps.dual", &s.dual)] {
            if let Some(v) = v {
                if v.len() != agents {
                    return fail(field, format!("needs {agents} entries, got {}", v.len()));
                }
                if v.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
                    return fail(field, "entries must be positive".into());
                }
            }
        }
        if s.gamma_i.is_some() && self.algorithm != Algorithm::DpdaDGammaI {
            return fail("steps.gamma_i", "only used by dpda-d-gamma-i".into());
        }
        if let Some(g) = s.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return fail("steps.gamma", format!("must be positive, got {g}"));
            }
        }
        self.budget.rule().validate().map_err(|e| HarnessError::Config(format!("budget: {e}")))?;
        let r = &self.run;
        if r.replications == 0 {
            return fail("run.replications", "must be positive".into());
        }
        if !(r.reference_tolerance > 0.0) {
            return fail("run.reference_tolerance", "must be positive".into());
        }
        if r.stride == 0 {
            return fail("run.stride", "must be positive".into());
        }
        Ok(())
    }
}
