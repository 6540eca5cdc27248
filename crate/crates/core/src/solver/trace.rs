use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::problem::SharingProblem;
use crate::metrics::{compute_metrics, Cadence, ErgodicAverage, MetricContext, MetricRow};

/// Run length and what to record along the way.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub iterations: usize,
    /// Metric rows are produced only when a context is given.
    pub metrics: Option<MetricContext>,
    pub cadence: Cadence,
    /// Require the strict step inequality instead of the non-strict one.
    pub strict_steps: bool,
    /// Keep every iterate (memory grows linearly in the iteration count).
    pub store_iterates: bool,
    /// Iterations at which the ergodic averages are copied into the trace.
    pub snapshots: Vec<usize>,
    /// Compare each mixing output with the exact consensus projection.
    pub record_mixing_error: bool,
    pub record_timing: bool,
}

impl RunOptions {
    pub fn new(iterations: usize) -> Self {
        Self {
            iterations,
            metrics: None,
            cadence: Cadence::default(),
            strict_steps: false,
            store_iterates: false,
            snapshots: Vec::new(),
            record_mixing_error: false,
            record_timing: false,
        }
    }

    pub fn with_metrics(mut self, ctx: MetricContext) -> Self {
        self.metrics = Some(ctx);
        self
    }
}

/// Read-only view of the state after iteration `k` (1-based).
#[derive(Debug)]
pub struct IterView<'a> {
    pub k: usize,
    pub comms: usize,
    pub primal: &'a [DVector<f64>],
    /// Stacked dual, one column per agent.
    pub dual: &'a DMatrix<f64>,
    /// Auxiliary consensus variable of the time-varying method.
    pub aux: Option<&'a DMatrix<f64>>,
    pub average: &'a ErgodicAverage,
    /// `‖R^k(w) - P(w)‖` for the mixing call of this iteration.
    pub mixing_error: Option<f64>,
}

pub type Observer<'a> = &'a mut dyn FnMut(&IterView<'_>);

#[derive(Debug, Clone, PartialEq)]
pub struct StoredIterate {
    pub primal: Vec<DVector<f64>>,
    pub dual: DMatrix<f64>,
    pub aux: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicSnapshot {
    pub k: usize,
    pub primal: Vec<DVector<f64>>,
    pub dual: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<MetricRow>,
    pub iterations: usize,
    pub comms: usize,
    pub primal: Vec<DVector<f64>>,
    pub dual: DMatrix<f64>,
    pub aux: Option<DMatrix<f64>>,
    pub average: ErgodicAverage,
    pub history: Vec<StoredIterate>,
    pub snapshots: Vec<ErgodicSnapshot>,
    pub mixing_errors: Vec<f64>,
}

/// Shared bookkeeping for all iterative methods.
pub(crate) struct Recorder<'a, 'o> {
    problem: &'a SharingProblem,
    opts: &'a RunOptions,
    clock: Instant,
    observer: Option<Observer<'o>>,
    pub(crate) average: ErgodicAverage,
    rows: Vec<MetricRow>,
    history: Vec<StoredIterate>,
    snapshots: Vec<ErgodicSnapshot>,
    mixing_errors: Vec<f64>,
}

impl<'a, 'o> Recorder<'a, 'o> {
    pub(crate) fn new(
        problem: &'a SharingProblem,
        opts: &'a RunOptions,
        dual_shape: (usize, usize),
        observer: Option<Observer<'o>>,
    ) -> Self {
        Self {
            problem,
            opts,
            clock: Instant::now(),
            observer,
            average: ErgodicAverage::new(&problem.dims(), dual_shape.0, dual_shape.1),
            rows: Vec::new(),
            history: Vec::new(),
            snapshots: Vec::new(),
            mixing_errors: Vec::new(),
        }
    }

    pub(crate) fn record(
        &mut self,
        k: usize,
        comms: usize,
        primal: &[DVector<f64>],
        dual: &DMatrix<f64>,
        aux: Option<&DMatrix<f64>>,
        mixing_error: Option<f64>,
    ) {
        self.average.push(primal, dual);
        if let Some(e) = mixing_error {
            self.mixing_errors.push(e);
        }
        if let Some(ctx) = &self.opts.metrics {
            if self.opts.cadence.records(k, self.opts.iterations) {
                let mut row = compute_metrics(
                    self.problem,
                    ctx,
                    k,
                    comms,
                    primal,
                    dual,
                    self.average.primal(),
                    self.average.dual(),
                );
                if self.opts.record_timing {
                    row.elapsed_ms = self.clock.elapsed().as_millis() as u64;
                }
                self.rows.push(row);
            }
        }
        if self.opts.store_iterates {
            self.history.push(StoredIterate { primal: primal.to_vec(), dual: dual.clone(), aux: aux.cloned() });
        }
        if self.opts.snapshots.contains(&k) {
            self.snapshots.push(ErgodicSnapshot {
                k,
                primal: self.average.primal().to_vec(),
                dual: self.average.dual().clone(),
            });
        }
        if let Some(obs) = self.observer.as_mut() {
            obs(&IterView { k, comms, primal, dual, aux, average: &self.average, mixing_error });
        }
    }

    pub(crate) fn finish(
        self,
        iterations: usize,
        comms: usize,
        primal: Vec<DVector<f64>>,
        dual: DMatrix<f64>,
        aux: Option<DMatrix<f64>>,
    ) -> RunTrace {
        RunTrace {
            rows: self.rows,
            iterations,
            comms,
            primal,
            dual,
            aux,
            average: self.average,
            history: self.history,
            snapshots: self.snapshots,
            mixing_errors: self.mixing_errors,
        }
    }
}
