//! Error measures tracked along solver runs and ergodic-average bookkeeping.

use nalgebra::{DMatrix, DVector};

use crate::graphs::GraphRound;
use crate::solver::SharingProblem;

/// How constraint violation is measured.
#[derive(Debug, Clone, PartialEq)]
pub enum Infeasibility {
    /// `d_K(Σ R_i ξ_i - r_i)`.
    ConeDistance,
    /// `(‖g_{1..dims}‖ - radius)₊` on the leading coordinates of the
    /// constraint image; for denoising problems this is `(‖Rξ - r‖ - ε)₊`.
    BallExcess { dims: usize, radius: f64 },
}

/// Reference value and violation measure shared by all rows of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricContext {
    pub reference_objective: f64,
    pub infeasibility: Infeasibility,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub k: usize,
    pub comms: usize,
    pub subopt_rel: f64,
    pub infeas: f64,
    pub consensus: f64,
    pub subopt_rel_erg: f64,
    pub infeas_erg: f64,
    pub consensus_erg: f64,
    pub elapsed_ms: u64,
    /// Set when the reference objective is not positive and the suboptimality
    /// columns hold absolute gaps.
    pub absolute: bool,
}

/// `|φ - φ*|/φ*`, or `|φ - φ*|` with the flag set when `φ* ≤ 0`.
pub fn suboptimality(value: f64, reference: f64) -> (f64, bool) {
    let gap = (value - reference).abs();
    if reference > 0.0 {
        (gap / reference, false)
    } else {
        (gap, true)
    }
}

pub fn infeasibility(problem: &SharingProblem, xi: &[DVector<f64>], measure: &Infeasibility) -> f64 {
    let g = problem.constraint_image(xi);
    match measure {
        Infeasibility::ConeDistance => problem.cone().dist(&g).expect("constraint image matches the cone"),
        Infeasibility::BallExcess { dims, radius } => (g.rows(0, *dims).norm() - radius).max(0.0),
    }
}

/// `max_i ‖y_i - (1/N) Σ_j y_j‖` over the columns of a stacked dual.
pub fn consensus_violation(dual: &DMatrix<f64>) -> f64 {
    let mean = dual.column_mean();
    dual.column_iter().map(|c| (c - &mean).norm()).fold(0.0, f64::max)
}

/// Euclidean distance of a stacked dual to the consensus subspace.
pub fn consensus_distance(dual: &DMatrix<f64>) -> f64 {
    let mean = dual.column_mean();
    dual.column_iter().map(|c| (c - &mean).norm_squared()).sum::<f64>().sqrt()
}

/// `‖(H ⊗ I)y‖` with `H` the oriented edge-node incidence matrix of `graph`.
pub fn incidence_norm(graph: &GraphRound, dual: &DMatrix<f64>) -> f64 {
    graph
        .edges()
        .iter()
        .map(|&(i, j)| (dual.column(i) - dual.column(j)).norm_squared())
        .sum::<f64>()
        .sqrt()
}

/// Evaluates one metric row at the current and the averaged iterates.
#[allow(clippy::too_many_arguments)]
pub fn compute_metrics(
    problem: &SharingProblem,
    ctx: &MetricContext,
    k: usize,
    comms: usize,
    xi: &[DVector<f64>],
    dual: &DMatrix<f64>,
    xi_avg: &[DVector<f64>],
    dual_avg: &DMatrix<f64>,
) -> MetricRow {
    let (subopt_rel, absolute) = suboptimality(problem.objective_finite(xi), ctx.reference_objective);
    let (subopt_rel_erg, _) = suboptimality(problem.objective_finite(xi_avg), ctx.reference_objective);
    MetricRow {
        k,
        comms,
        subopt_rel,
        infeas: infeasibility(problem, xi, &ctx.infeasibility),
        consensus: consensus_violation(dual),
        subopt_rel_erg,
        infeas_erg: infeasibility(problem, xi_avg, &ctx.infeasibility),
        consensus_erg: consensus_violation(dual_avg),
        elapsed_ms: 0,
        absolute,
    }
}

/// Which iterations get a metric row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cadence {
    pub dense_until: usize,
    pub stride: usize,
}

impl Default for Cadence {
    fn default() -> Self {
        Self { dense_until: 2000, stride: 10 }
    }
}

impl Cadence {
    /// Every iteration up to `dense_until`, every `stride`-th afterwards, and
    /// always the last one.
    pub fn records(&self, k: usize, last: usize) -> bool {
        k <= self.dense_until || k % self.stride.max(1) == 0 || k == last
    }
}

/// Running means `(1/K) Σ_{k=1..K}` of primal blocks and stacked duals.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAverage {
    count: usize,
    primal: Vec<DVector<f64>>,
    dual: DMatrix<f64>,
}

impl ErgodicAverage {
    pub fn new(dims: &[usize], dual_rows: usize, dual_cols: usize) -> Self {
        Self {
            count: 0,
            primal: dims.iter().map(|&d| DVector::zeros(d)).collect(),
            dual: DMatrix::zeros(dual_rows, dual_cols),
        }
    }

    pub fn push(&mut self, xi: &[DVector<f64>], dual: &DMatrix<f64>) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (avg, x) in self.primal.iter_mut().zip(xi) {
            *avg += (x - &*avg) * w;
        }
        self.dual += (dual - &self.dual) * w;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn primal(&self) -> &[DVector<f64>] {
        &self.primal
    }

    pub fn dual(&self) -> &DMatrix<f64> {
        &self.dual
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cones::Cone;
    use crate::prox::ProxOracle;
    use crate::solver::{AgentData, SmoothTerm};
    use proptest::prelude::*;

    fn problem() -> SharingProblem {
        let a = AgentData::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
            DVector::from_column_slice(&[1.0, 1.0, 0.0]),
            SmoothTerm::Zero,
            ProxOracle::L1Norm,
        )
        .unwrap();
        SharingProblem::new(Cone::SecondOrder(3), vec![a]).unwrap()
    }

    #[test]
    fn trivial_examples() {
        let y = DMatrix::from_fn(2, 4, |r, _| r as f64 + 0.5);
        assert_eq!(consensus_violation(&y), 0.0);
        assert_eq!(consensus_distance(&y), 0.0);

        let p = problem();
        let on_boundary = vec![DVector::from_column_slice(&[4.0, 5.0])];
        let ball = Infeasibility::BallExcess { dims: 2, radius: 5.0 };
        assert_eq!(infeasibility(&p, &on_boundary, &ball), 0.0);
        let outside = vec![DVector::from_column_slice(&[7.0, 5.0])];
        assert!((infeasibility(&p, &outside, &ball) - (52f64.sqrt() - 5.0)).abs() < 1e-12);

        assert_eq!(suboptimality(2.5, 2.5), (0.0, false));
        assert_eq!(suboptimality(3.0, 2.0), (0.5, false));
        assert_eq!(suboptimality(-1.0, 0.0), (1.0, true));
    }

    #[test]
    fn incidence_norm_on_a_path() {
        let g = GraphRound::new(3, [(0, 1), (1, 2)], false).unwrap();
        let y = DMatrix::from_row_slice(1, 3, &[0.0, 3.0, 7.0]);
        assert!((incidence_norm(&g, &y) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn cadence() {
        let c = Cadence::default();
        assert!(c.records(2000, 5000));
        assert!(!c.records(2001, 5000));
        assert!(c.records(2010, 5000));
        assert!(c.records(4999, 4999));
    }

    proptest! {
        #[test]
        fn running_average_matches_recomputation(values in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 6), 1..60)) {
            let mut avg = ErgodicAverage::new(&[2], 2, 2);
            let mut cons = Vec::new();
            for v in &values {
                let xi = vec![DVector::from_column_slice(&v[..2])];
                let y = DMatrix::from_column_slice(2, 2, &v[2..]);
                cons.push(consensus_violation(&y));
                avg.push(&xi, &y);
            }
            let k = values.len() as f64;
            let mut x_sum = DVector::zeros(2);
            let mut y_sum = DMatrix::zeros(2, 2);
            for v in &values {
                x_sum += DVector::from_column_slice(&v[..2]);
                y_sum += DMatrix::from_column_slice(2, 2, &v[2..]);
            }
            prop_assert!((avg.primal()[0].clone() - x_sum / k).abs().max() < 1e-12);
            prop_assert!((avg.dual() - y_sum / k).abs().max() < 1e-12);
            let mean_cons = cons.iter().sum::<f64>() / k;
            prop_assert!(consensus_violation(avg.dual()) <= mean_cons + 1e-12);
        }
    }
}
