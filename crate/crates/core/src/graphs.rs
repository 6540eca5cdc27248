//! Communication graphs: single rounds, random generators, time-varying
//! schedules and the per-round weight matrices.
//!
//! Nodes are indexed from 0 internally. The edge-list text format uses 1-based
//! labels.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::seed;

/// Edge set of one communication round.
///
/// Undirected edges are stored as `(min, max)`. A directed edge `(i, j)` means
/// `i` sends to `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphRound {
    n: usize,
    edges: Vec<(usize, usize)>,
    directed: bool,
}

impl GraphRound {
    /// Builds a round, dropping duplicate edges. Self-loops and out-of-range
    /// endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>, directed: bool) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidArgument(format!("edge ({u}, {v}) out of range for {n} nodes")));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("self-loop at node {u}")));
            }
            set.insert(if directed { (u, v) } else { (u.min(v), u.max(v)) });
        }
        Ok(Self { n, edges: set.into_iter().collect(), directed })
    }

    pub fn empty(n: usize, directed: bool) -> Self {
        Self { n, edges: Vec::new(), directed }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Neighbor lists of an undirected round (each edge listed at both ends).
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Out-neighbors excluding the node itself.
    pub fn out_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            if !self.directed {
                adj[v].push(u);
            }
        }
        adj
    }

    /// In-neighbors excluding the node itself.
    pub fn in_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[v].push(u);
            if !self.directed {
                adj[u].push(v);
            }
        }
        adj
    }

    /// Undirected degrees, or out-degrees for directed rounds (self not counted).
    pub fn degrees(&self) -> Vec<usize> {
        self.out_neighbors().iter().map(Vec::len).collect()
    }

    /// Connectivity for undirected rounds, strong connectivity for directed ones.
    pub fn is_connected(&self) -> bool {
        let reach_all = |adj: &[Vec<usize>]| {
            let mut seen = vec![false; self.n];
            let mut queue = VecDeque::from([0]);
            seen[0] = true;
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            seen.into_iter().all(|s| s)
        };
        reach_all(&self.out_neighbors()) && (!self.directed || reach_all(&self.in_neighbors()))
    }

    /// Header `directed N` or `undirected N`, then one `u v` line per edge (1-based).
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("{} {}\n", if self.directed { "directed" } else { "undirected" }, self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{} {}", u + 1, v + 1);
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let bad = |msg: String| Error::InvalidArgument(format!("edge list: {msg}"));
        let header = lines.next().ok_or_else(|| bad("missing header".into()))?;
        let mut parts = header.split_whitespace();
        let directed = match parts.next() {
            Some("directed") => true,
            Some("undirected") => false,
            other => return Err(bad(format!("unknown graph kind {other:?}"))),
        };
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("header needs a node count".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let ends: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse::<usize>().map_err(|_| bad(format!("bad line {line:?}"))))
                .collect::<Result<_>>()?;
            match ends[..] {
                [u, v] if u >= 1 && v >= 1 => edges.push((u - 1, v - 1)),
                _ => return Err(bad(format!("bad line {line:?}"))),
            }
        }
        Self::new(n, edges, directed)
    }
}

/// Random connected small-world graph: a random Hamiltonian cycle plus
/// `e - n` further edges drawn uniformly from the remaining pairs.
pub fn gen_small_world(n: usize, e: usize, seed: u64) -> Result<GraphRound> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("small-world graph needs n >= 3, got {n}")));
    }
    let max_edges = n * (n - 1) / 2;
    if e < n || e > max_edges {
        return Err(Error::InvalidArgument(format!(
            "edge count {e} outside [{n}, {max_edges}] for {n} nodes"
        )));
    }
    let mut rng = seed::stream(seed, 0, "small-world");
    let mut order: Vec<usize> = (0..n).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut rng);
    let mut edges: BTreeSet<(usize, usize)> = (0..n)
        .map(|i| {
            let (u, v) = (order[i], order[(i + 1) % n]);
            (u.min(v), u.max(v))
        })
        .collect();
    let rest: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .filter(|p| !edges.contains(p))
        .collect();
    for idx in sample(&mut rng, rest.len(), e - n) {
        edges.insert(rest[idx]);
    }
    GraphRound::new(n, edges, false)
}

/// The 12-node, 24-arc strongly connected digraph used for the directed
/// experiments.
pub fn twelve_node_digraph() -> GraphRound {
    const ARCS: [(usize, usize); 24] = [
        (1, 10), (1, 6), (8, 1), (8, 10), (8, 6), (6, 8), (6, 3), (11, 1),
        (9, 11), (9, 3), (9, 5), (4, 9), (4, 11), (7, 4), (7, 12), (7, 6),
        (2, 10), (12, 6), (12, 2), (12, 5), (3, 12), (5, 3), (10, 7), (10, 5),
    ];
    GraphRound::new(12, ARCS.iter().map(|&(u, v)| (u - 1, v - 1)), true)
        .expect("fixed arc list is valid")
}

/// `V_ij = 1/(max(d_i, d_j) + 1)` on edges, remaining mass on the diagonal.
pub fn metropolis_weights(round: &GraphRound) -> Result<DMatrix<f64>> {
    if round.directed {
        return Err(Error::InvalidArgument("Metropolis weights need an undirected round".into()));
    }
    let deg = round.degrees();
    let mut w = DMatrix::zeros(round.n, round.n);
    for &(u, v) in &round.edges {
        let x = 1.0 / (deg[u].max(deg[v]) + 1) as f64;
        w[(u, v)] = x;
        w[(v, u)] = x;
    }
    for i in 0..round.n {
        let off: f64 = (0..round.n).filter(|&j| j != i).map(|j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    Ok(w)
}

/// Column `j` holds `1/d_j` at row `j` and at every out-neighbor of `j`, where
/// `d_j` counts `j` itself.
pub fn pushsum_weights(round: &GraphRound) -> Result<DMatrix<f64>> {
    if !round.directed {
        return Err(Error::InvalidArgument("push-sum weights need a directed round".into()));
    }
    let out = round.out_neighbors();
    let mut w = DMatrix::zeros(round.n, round.n);
    for (j, targets) in out.iter().enumerate() {
        let x = 1.0 / (targets.len() + 1) as f64;
        w[(j, j)] = x;
        for &i in targets {
            w[(i, j)] = x;
        }
    }
    Ok(w)
}

fn round_weights(round: &GraphRound) -> Result<DMatrix<f64>> {
    if round.directed {
        pushsum_weights(round)
    } else {
        metropolis_weights(round)
    }
}

/// Time-varying schedule built window by window from a base graph.
///
/// Each window of `M` rounds draws `⌈p|E*|⌉` base edges without replacement for
/// its first `M - 1` rounds; the last round carries the base edges not drawn
/// earlier in the window, so every window covers the base graph. If the early
/// rounds already cover everything, the last round is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSchedule {
    base: GraphRound,
    window: usize,
    fraction: f64,
    seed: u64,
}

impl GraphSchedule {
    pub fn base(&self) -> &GraphRound {
        &self.base
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn is_directed(&self) -> bool {
        self.base.directed
    }

    pub fn node_count(&self) -> usize {
        self.base.n
    }

    pub fn is_static(&self) -> bool {
        self.window == 1
    }

    /// Edges drawn per sampled round.
    pub fn sample_size(&self) -> usize {
        // Guard against p·|E| landing a hair above an integer in floating point.
        let raw = (self.fraction * self.base.edge_count() as f64 - 1e-9).ceil();
        (raw.max(0.0) as usize).min(self.base.edge_count())
    }

    /// All rounds of window `k` (rounds `kM … kM + M - 1`, 0-based).
    pub fn window_rounds(&self, k: usize) -> Vec<GraphRound> {
        if self.window == 1 {
            return vec![self.base.clone()];
        }
        let mut rng = seed::stream(self.seed, k as u64, "schedule-window");
        let total = self.base.edge_count();
        let take = self.sample_size();
        let mut covered = vec![false; total];
        let mut rounds = Vec::with_capacity(self.window);
        for _ in 0..self.window - 1 {
            let mut picked = sample(&mut rng, total, take).into_vec();
            picked.sort_unstable();
            for &i in &picked {
                covered[i] = true;
            }
            rounds.push(self.sub_round(picked));
        }
        let rest = (0..total).filter(|&i| !covered[i]).collect();
        rounds.push(self.sub_round(rest));
        rounds
    }

    /// Round `t` (0-based).
    pub fn round(&self, t: usize) -> GraphRound {
        self.window_rounds(t / self.window).swap_remove(t % self.window)
    }

    fn sub_round(&self, idx: Vec<usize>) -> GraphRound {
        GraphRound {
            n: self.base.n,
            edges: idx.into_iter().map(|i| self.base.edges[i]).collect(),
            directed: self.base.directed,
        }
    }

    /// Weight matrix of round `t`: Metropolis if undirected, push-sum if directed.
    pub fn weights(&self, t: usize) -> DMatrix<f64> {
        round_weights(&self.round(t)).expect("schedule rounds share the base orientation")
    }
}

pub fn gen_schedule(base: GraphRound, window: usize, fraction: f64, seed: u64) -> Result<GraphSchedule> {
    if window == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("sampling fraction must lie in (0, 1), got {fraction}")));
    }
    if !base.is_connected() {
        return Err(Error::InvalidArgument("base graph is not (strongly) connected".into()));
    }
    Ok(GraphSchedule { base, window, fraction, seed })
}

/// Schedule that repeats the base graph every round.
pub fn static_schedule(base: GraphRound) -> Result<GraphSchedule> {
    if !base.is_connected() {
        return Err(Error::InvalidArgument("base graph is not (strongly) connected".into()));
    }
    Ok(GraphSchedule { base, window: 1, fraction: 0.5, seed: 0 })
}

/// `W^{t,s} = V^t V^{t-1} ⋯ V^{s+1}` with `V^u` the weights of round `u`.
pub fn weight_product(schedule: &GraphSchedule, s: usize, t: usize) -> Result<DMatrix<f64>> {
    if t <= s {
        return Err(Error::InvalidArgument(format!("weight product needs t > s, got t = {t}, s = {s}")));
    }
    let n = schedule.node_count();
    let mut w = DMatrix::identity(n, n);
    let mut cached: Option<(usize, Vec<GraphRound>)> = None;
    for u in s + 1..=t {
        let k = u / schedule.window;
        if cached.as_ref().map(|c| c.0) != Some(k) {
            cached = Some((k, schedule.window_rounds(k)));
        }
        let round = &cached.as_ref().unwrap().1[u % schedule.window];
        w = round_weights(round)? * w;
    }
    Ok(w)
}
