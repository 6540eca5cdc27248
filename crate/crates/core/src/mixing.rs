//! Approximate consensus operators: exact bounded-consensus projection,
//! multi-round Metropolis averaging on undirected schedules, push-sum on
//! directed schedules, and the weighted variants for per-agent `γ_i`.
//!
//! Stacked vectors are `m × N` matrices with one column per agent.

use nalgebra::{DMatrix, DVector};

use crate::cones::clamp_norm;
use crate::error::{check_dim, Error, Result};
use crate::graphs::{weight_product, GraphRound, GraphSchedule};

/// Per-iteration communication budget `q_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetRule {
    /// `⌈(3 + c)·log_{1/α}(k + 1)⌉`.
    Logarithmic { alpha: f64, c: f64 },
    /// `⌈scale·ln(k + 1)⌉`.
    ScaledLog { scale: f64 },
    /// `⌈(k + 1)^{1/p}⌉`.
    Polynomial { p: f64 },
    Constant(usize),
    /// `q_k` read from the list; iterations past its end are an error.
    Explicit(Vec<usize>),
}

impl Default for BudgetRule {
    fn default() -> Self {
        BudgetRule::ScaledLog { scale: 10.0 }
    }
}

// Keeps values such as 4·log₂4 from rounding up past an exact integer.
fn ceil_guarded(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

impl BudgetRule {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match self {
            BudgetRule::Logarithmic { alpha, c } => {
                if !(*alpha > 0.0 && *alpha < 1.0) {
                    return bad(format!("logarithmic budget needs alpha in (0, 1), got {alpha}"));
                }
                if !(*c > 0.0) {
                    return bad(format!("logarithmic budget needs c > 0, got {c}"));
                }
            }
            BudgetRule::ScaledLog { scale } if !(*scale > 0.0) => {
                return bad(format!("log budget scale must be positive, got {scale}"));
            }
            BudgetRule::Polynomial { p } if !(*p > 0.0) => {
                return bad(format!("polynomial budget exponent must be positive, got {p}"));
            }
            BudgetRule::Explicit(list) if list.is_empty() => {
                return bad("explicit budget list is empty".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// `q_k`, clamped below by 1.
    pub fn rounds(&self, k: usize) -> Result<usize> {
        self.validate()?;
        let x = (k + 1) as f64;
        let q = match self {
            BudgetRule::Logarithmic { alpha, c } => ceil_guarded((3.0 + c) * x.ln() / (1.0 / alpha).ln()),
            BudgetRule::ScaledLog { scale } => ceil_guarded(scale * x.ln()),
            BudgetRule::Polynomial { p } => ceil_guarded(x.powf(1.0 / p)),
            BudgetRule::Constant(q) => *q,
            BudgetRule::Explicit(list) => *list.get(k).ok_or_else(|| {
                Error::InvalidArgument(format!("explicit budget has {} entries, iteration {k} requested", list.len()))
            })?,
        };
        Ok(q.max(1))
    }
}

/// Budget rule plus the shared round cursor `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingBudget {
    rule: BudgetRule,
    cursor: usize,
}

impl MixingBudget {
    pub fn new(rule: BudgetRule) -> Result<Self> {
        rule.validate()?;
        Ok(Self { rule, cursor: 0 })
    }

    pub fn rule(&self) -> &BudgetRule {
        &self.rule
    }

    /// Rounds consumed so far.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Returns `(t_k, q_k)` for iteration `k` and advances the cursor by `q_k`.
    pub fn advance(&mut self, k: usize) -> Result<(usize, usize)> {
        let q = self.rule.rounds(k)?;
        let start = self.cursor;
        self.cursor += q;
        Ok((start, q))
    }
}

/// `q_k` for iteration `k` under the given budget's rule.
pub fn next_budget(budget: &MixingBudget, k: usize) -> Result<usize> {
    budget.rule.rounds(k)
}

/// Block dimension, agent count, dual bound `B` (balls have radius `2B`) and
/// optional per-agent weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusGeometry {
    pub block_dim: usize,
    pub agents: usize,
    pub dual_bound: f64,
    pub weights: Option<Vec<f64>>,
}

impl ConsensusGeometry {
    pub fn new(block_dim: usize, agents: usize, dual_bound: f64) -> Result<Self> {
        let g = Self { block_dim, agents, dual_bound, weights: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = Some(weights);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dual_bound > 0.0 && self.dual_bound.is_finite()) {
            return Err(Error::InvalidArgument(format!("dual bound must be positive, got {}", self.dual_bound)));
        }
        if self.agents == 0 || self.block_dim == 0 {
            return Err(Error::InvalidArgument("consensus geometry needs positive sizes".into()));
        }
        if let Some(w) = &self.weights {
            check_dim(self.agents, w.len())?;
            if let Some(bad) = w.iter().find(|g| !(**g > 0.0)) {
                return Err(Error::InvalidArgument(format!("agent weights must be positive, got {bad}")));
            }
        }
        Ok(())
    }

    /// Radius `2B` of the dual ball.
    pub fn radius(&self) -> f64 {
        2.0 * self.dual_bound
    }

    fn check_stack(&self, w: &DMatrix<f64>) -> Result<()> {
        check_dim(self.block_dim, w.nrows())?;
        check_dim(self.agents, w.ncols())
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.as_ref().map_or(1.0, |w| w[i])
    }
}

/// Every block replaced by the ball-projected (weighted) mean of the blocks.
///
/// The mean is accumulated as offsets from the first block so that consensus
/// inputs are returned unchanged; uniform weights take the unweighted path.
pub fn exact_consensus_projection(geom: &ConsensusGeometry, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    geom.check_stack(w)?;
    let anchor = w.column(0).into_owned();
    let mut shift = DVector::zeros(geom.block_dim);
    let uniform = geom.weights.as_ref().is_none_or(|g| g.iter().all(|x| *x == g[0]));
    let mut total = 0.0;
    for i in 1..geom.agents {
        let g = if uniform { 1.0 } else { geom.weight(i) };
        shift.axpy(g, &(w.column(i) - &anchor), 1.0);
    }
    for i in 0..geom.agents {
        total += if uniform { 1.0 } else { geom.weight(i) };
    }
    let mut mean = anchor + shift / total;
    clamp_norm(geom.radius(), mean.as_mut_slice());
    Ok(DMatrix::from_fn(geom.block_dim, geom.agents, |r, _| mean[r]))
}

/// Sparse per-round message pattern.
#[derive(Debug, Clone)]
struct RoundPlan {
    // For node i: weight on its own value and (sender, weight) pairs.
    self_weight: Vec<f64>,
    incoming: Vec<Vec<(usize, f64)>>,
}

impl RoundPlan {
    fn metropolis(round: &GraphRound) -> Self {
        let adj = round.neighbors();
        let deg: Vec<usize> = adj.iter().map(Vec::len).collect();
        let incoming: Vec<Vec<(usize, f64)>> = adj
            .iter()
            .enumerate()
            .map(|(i, nb)| nb.iter().map(|&j| (j, 1.0 / (deg[i].max(deg[j]) + 1) as f64)).collect())
            .collect();
        let self_weight = incoming.iter().map(|inc| 1.0 - inc.iter().map(|x| x.1).sum::<f64>()).collect();
        Self { self_weight, incoming }
    }

    fn push_sum(round: &GraphRound) -> Self {
        let out = round.out_neighbors();
        let share: Vec<f64> = out.iter().map(|o| 1.0 / (o.len() + 1) as f64).collect();
        let incoming = round
            .in_neighbors()
            .iter()
            .map(|inc| inc.iter().map(|&j| (j, share[j])).collect())
            .collect();
        Self { self_weight: share, incoming }
    }

    fn apply(&self, x: &DMatrix<f64>, out: &mut DMatrix<f64>) {
        for (i, inc) in self.incoming.iter().enumerate() {
            let mut col = out.column_mut(i);
            col.copy_from(&x.column(i));
            col *= self.self_weight[i];
            for &(j, wt) in inc {
                col.axpy(wt, &x.column(j), 1.0);
            }
        }
    }

    fn apply_scalar(&self, x: &[f64], out: &mut [f64]) {
        for (i, inc) in self.incoming.iter().enumerate() {
            out[i] = self.self_weight[i] * x[i] + inc.iter().map(|&(j, wt)| wt * x[j]).sum::<f64>();
        }
    }
}

/// Caches the message plans of one schedule window.
#[derive(Debug, Clone)]
struct PlanCache {
    window: Option<(usize, Vec<RoundPlan>)>,
}

impl PlanCache {
    fn new() -> Self {
        Self { window: None }
    }

    fn plan(&mut self, schedule: &GraphSchedule, t: usize) -> &RoundPlan {
        let k = t / schedule.window();
        if self.window.as_ref().map(|w| w.0) != Some(k) {
            let plans = schedule
                .window_rounds(k)
                .iter()
                .map(|r| if r.is_directed() { RoundPlan::push_sum(r) } else { RoundPlan::metropolis(r) })
                .collect();
            self.window = Some((k, plans));
        }
        &self.window.as_ref().unwrap().1[t % schedule.window()]
    }
}

fn check_schedule(schedule: &GraphSchedule, geom: &ConsensusGeometry, directed: bool) -> Result<()> {
    if schedule.is_directed() != directed {
        return Err(Error::InvalidArgument(format!(
            "{} schedule passed to the {} protocol",
            if schedule.is_directed() { "directed" } else { "undirected" },
            if directed { "push-sum" } else { "undirected averaging" }
        )));
    }
    check_dim(geom.agents, schedule.node_count())
}

fn check_rounds(rounds: usize) -> Result<()> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("mixing needs at least one round".into()));
    }
    Ok(())
}

// Runs rounds start+1 ..= start+rounds. Returns the numerator stack and, when
// a denominator is tracked, the per-node scalars.
fn run_rounds(
    cache: &mut PlanCache,
    schedule: &GraphSchedule,
    start: usize,
    rounds: usize,
    mut num: DMatrix<f64>,
    mut den: Option<Vec<f64>>,
) -> (DMatrix<f64>, Option<Vec<f64>>) {
    let mut num_next = num.clone();
    let mut den_next = den.clone();
    for t in start + 1..=start + rounds {
        let plan = cache.plan(schedule, t);
        plan.apply(&num, &mut num_next);
        std::mem::swap(&mut num, &mut num_next);
        if let (Some(d), Some(dn)) = (den.as_mut(), den_next.as_mut()) {
            plan.apply_scalar(d, dn);
            std::mem::swap(d, dn);
        }
    }
    (num, den)
}

fn finish(geom: &ConsensusGeometry, mut num: DMatrix<f64>, den: Option<Vec<f64>>) -> Result<DMatrix<f64>> {
    for i in 0..geom.agents {
        let mut col = num.column_mut(i);
        if let Some(d) = &den {
            if !(d[i] > 0.0) {
                return Err(Error::Numerical(format!("push-sum weight of node {i} is {}", d[i])));
            }
            col /= d[i];
        }
        let norm = col.norm();
        if norm > geom.radius() {
            col *= geom.radius() / norm;
        }
    }
    Ok(num)
}

fn weighted_start(geom: &ConsensusGeometry, w: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut num = w.clone();
    let mut den = vec![1.0; geom.agents];
    if let Some(g) = &geom.weights {
        for (i, gi) in g.iter().enumerate() {
            num.column_mut(i).scale_mut(*gi);
            den[i] = *gi;
        }
    }
    (num, den)
}

/// Metropolis averaging over rounds `start+1 ..= start+rounds` of an
/// undirected schedule, with per-node ball projection.
pub fn approx_average_undirected(
    schedule: &GraphSchedule,
    start: usize,
    rounds: usize,
    geom: &ConsensusGeometry,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    approx_undirected_cached(&mut PlanCache::new(), schedule, start, rounds, geom, w)
}

fn approx_undirected_cached(
    cache: &mut PlanCache,
    schedule: &GraphSchedule,
    start: usize,
    rounds: usize,
    geom: &ConsensusGeometry,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_schedule(schedule, geom, false)?;
    check_rounds(rounds)?;
    geom.check_stack(w)?;
    let (num, den) = if geom.weights.is_some() {
        let (n, d) = weighted_start(geom, w);
        (n, Some(d))
    } else {
        (w.clone(), None)
    };
    let (num, den) = run_rounds(cache, schedule, start, rounds, num, den);
    finish(geom, num, den)
}

/// Push-sum over rounds `start+1 ..= start+rounds` of a directed schedule;
/// node outputs are ball-projected ratios `η_i/ν_i`.
pub fn approx_average_directed(
    schedule: &GraphSchedule,
    start: usize,
    rounds: usize,
    geom: &ConsensusGeometry,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    approx_directed_cached(&mut PlanCache::new(), schedule, start, rounds, geom, w)
}

fn approx_directed_cached(
    cache: &mut PlanCache,
    schedule: &GraphSchedule,
    start: usize,
    rounds: usize,
    geom: &ConsensusGeometry,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_schedule(schedule, geom, true)?;
    check_rounds(rounds)?;
    geom.check_stack(w)?;
    let (num, den) = weighted_start(geom, w);
    let (num, den) = run_rounds(cache, schedule, start, rounds, num, Some(den));
    finish(geom, num, den)
}

/// Reference path: forms `W^{start+rounds, start}` explicitly and applies it.
pub fn dense_average(
    schedule: &GraphSchedule,
    start: usize,
    rounds: usize,
    geom: &ConsensusGeometry,
    w: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_rounds(rounds)?;
    geom.check_stack(w)?;
    let product = weight_product(schedule, start, start + rounds)?;
    let (num, den) = weighted_start(geom, w);
    let num_t = &num * product.transpose();
    let den_vec = &product * DVector::from_vec(den);
    let track = schedule.is_directed() || geom.weights.is_some();
    finish(geom, num_t, track.then(|| den_vec.iter().copied().collect()))
}

/// Which consensus protocol a mixer runs.
#[derive(Debug, Clone)]
pub enum Protocol {
    /// Exact projection onto the bounded consensus set; uses no rounds.
    Exact,
    Undirected(GraphSchedule),
    PushSum(GraphSchedule),
}

/// Stateful consensus operator `R^k` owning the shared round cursor.
#[derive(Debug, Clone)]
pub struct ConsensusMixer {
    geom: ConsensusGeometry,
    protocol: Protocol,
    budget: MixingBudget,
    cache: PlanCache,
}

impl ConsensusMixer {
    pub fn new(geom: ConsensusGeometry, protocol: Protocol, budget: MixingBudget) -> Result<Self> {
        geom.validate()?;
        match &protocol {
            Protocol::Exact => {}
            Protocol::Undirected(s) => check_schedule(s, &geom, false)?,
            Protocol::PushSum(s) => check_schedule(s, &geom, true)?,
        }
        Ok(Self { geom, protocol, budget, cache: PlanCache::new() })
    }

    pub fn geometry(&self) -> &ConsensusGeometry {
        &self.geom
    }

    pub fn protocol(&self) -> &Protocol {
        &self.protocol
    }

    pub fn budget(&self) -> &MixingBudget {
        &self.budget
    }

    /// Applies `R^k` for iteration `k`. Returns the output and the number of
    /// communication rounds spent.
    pub fn apply(&mut self, k: usize, w: &DMatrix<f64>) -> Result<(DMatrix<f64>, usize)> {
        match &self.protocol {
            Protocol::Exact => Ok((exact_consensus_projection(&self.geom, w)?, 0)),
            Protocol::Undirected(s) => {
                let (start, q) = self.budget.advance(k)?;
                Ok((approx_undirected_cached(&mut self.cache, s, start, q, &self.geom, w)?, q))
            }
            Protocol::PushSum(s) => {
                let (start, q) = self.budget.advance(k)?;
                Ok((approx_directed_cached(&mut self.cache, s, start, q, &self.geom, w)?, q))
            }
        }
    }
}
