//! Centralized Jacobi proximal ADMM for basis pursuit denoising.
//!
//! The noisy constraint is lifted to `Σ R_i ξ_i + w = r` with a slack `w`
//! confined to the ball of radius `ε`; the slack is one more Jacobi block
//! whose prox is the ball projection. Iterates are reported in the sharing
//! layout of [`bpd_to_sharing`], so metrics match the distributed methods.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::problems::{bpd_to_sharing, BpdInstance};
use crate::prox::{project_ball, soft_threshold};
use crate::solver::{spectral_norm, Observer, Recorder, RunOptions, RunTrace};

/// Relative margin kept above the positivity floor `ρ‖R_i‖²`.
const FLOOR_MARGIN: f64 = 1e-6;
/// Steps whose `G`-norm is below this fraction of `1 + ‖u‖_G` skip the
/// contraction test; rounding dominates there.
const TEST_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct ProxJadmmConfig {
    /// Penalty `ρ`.
    pub penalty: f64,
    /// `τ̄_i` per agent, with the slack block last when `ε > 0`.
    pub prox_weights: Vec<f64>,
    /// Multiplier damping `γ_J ∈ (0, 1]`.
    pub damping: f64,
    /// Enables the adaptive update of the `τ̄_i`.
    pub adaptive: bool,
    /// A step is accepted when `h(u, u⁺) ≥ η‖u - u⁺‖²_G`.
    pub contraction: f64,
    /// Factor applied to all `τ̄_i` when a step is rejected.
    pub increase: f64,
    /// Factor applied at the end of a window whose residual shrank below
    /// `improvement` times its starting value.
    pub decrease: f64,
    pub improvement: f64,
    pub window: usize,
}

impl ProxJadmmConfig {
    /// `ρ = 10/‖r‖₁`, `τ̄_i = 0.1·N·ρ`, `γ_J = 1`; adaptive with `η = 0`,
    /// factors 2 and 0.7, threshold 0.9 over windows of 10.
    pub fn standard(inst: &BpdInstance, partition: &[usize]) -> Result<Self> {
        let l1 = inst.rhs.lp_norm(1);
        if !(l1 > 0.0) {
            return Err(Error::InvalidArgument("right-hand side is zero".into()));
        }
        let penalty = 10.0 / l1;
        let blocks = partition.len() + usize::from(!inst.is_noise_free());
        let weight = 0.1 * partition.len() as f64 * penalty;
        Ok(Self {
            penalty,
            prox_weights: vec![weight; blocks],
            damping: 1.0,
            adaptive: true,
            contraction: 0.0,
            increase: 2.0,
            decrease: 0.7,
            improvement: 0.9,
            window: 10,
        })
    }

    fn validate(&self, blocks: usize) -> Result<()> {
        check_dim(blocks, self.prox_weights.len())?;
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return bad(format!("penalty must be positive, got {}", self.penalty));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if self.prox_weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("proximal weights must be positive".into());
        }
        let factors_ok = self.increase > 1.0
            && self.decrease > 0.0
            && self.decrease <= 1.0
            && self.improvement > 0.0
            && self.improvement < 1.0
            && self.contraction >= 0.0
            && self.window > 0;
        if self.adaptive && !factors_ok {
            return bad("adaptive update needs increase > 1, decrease in (0, 1], improvement in (0, 1), η ≥ 0, window > 0".into());
        }
        Ok(())
    }
}

/// Final state of a Prox-JADMM run.
#[derive(Debug, Clone)]
pub struct JadmmOutcome {
    pub trace: RunTrace,
    /// `τ̄_i` after adaptation.
    pub prox_weights: Vec<f64>,
    /// `‖Σ R_i ξ_i + w - r‖` at the last iterate.
    pub residual: f64,
    pub slack: DVector<f64>,
    pub multiplier: DVector<f64>,
    /// Steps redone with larger proximal weights.
    pub rejected: usize,
}

#[derive(Clone)]
struct State {
    xi: Vec<DVector<f64>>,
    slack: DVector<f64>,
    multiplier: DVector<f64>,
    residual: DVector<f64>,
}

struct Jadmm<'a> {
    inst: &'a BpdInstance,
    blocks: Vec<DMatrix<f64>>,
    rho: f64,
    damping: f64,
}

impl Jadmm<'_> {
    fn noisy(&self) -> bool {
        !self.inst.is_noise_free()
    }

    fn residual(&self, xi: &[DVector<f64>], slack: &DVector<f64>) -> DVector<f64> {
        let mut res = slack - &self.inst.rhs;
        for (b, x) in self.blocks.iter().zip(xi) {
            res.gemv(1.0, b, x, 1.0);
        }
        res
    }

    fn step(&self, state: &State, weights: &[f64]) -> Result<State> {
        let u = &state.residual - &state.multiplier / self.rho;
        let mut xi = Vec::with_capacity(self.blocks.len());
        for (i, (b, x)) in self.blocks.iter().zip(&state.xi).enumerate() {
            let mut v = x.clone();
            v.gemv_tr(-self.rho / weights[i], b, &u, 1.0);
            xi.push(soft_threshold(&v, 1.0 / weights[i])?);
        }
        let slack = if self.noisy() {
            let step = self.rho / weights[self.blocks.len()];
            project_ball(self.inst.eps, &(&state.slack - &u * step))?
        } else {
            state.slack.clone()
        };
        let residual = self.residual(&xi, &slack);
        let mut multiplier = state.multiplier.clone();
        multiplier.axpy(-self.damping * self.rho, &residual, 1.0);
        Ok(State { xi, slack, multiplier, residual })
    }

    /// `(h(u, u⁺), ‖u - u⁺‖²_G, ‖u‖²_G)` with `P_i = τ̄_i I - ρR_iᵀR_i`,
    /// `G = diag(P_i + ρR_iᵀR_i, I/(ργ))` and
    /// `h = Σ‖Δξ_i‖²_{P_i} + (2-γ)/(ργ²)‖Δλ‖² + (2/γ)Δλᵀ(Σ R_i Δξ_i + Δw)`.
    /// The distance to any solution in `G`-norm drops by at least `h`.
    fn contraction(&self, from: &State, to: &State, weights: &[f64]) -> (f64, f64, f64) {
        let (rho, g) = (self.rho, self.damping);
        let mut h = 0.0;
        let mut moved = 0.0;
        let mut size = 0.0;
        for (i, b) in self.blocks.iter().enumerate() {
            let d = &from.xi[i] - &to.xi[i];
            let dn = d.norm_squared();
            h += weights[i] * dn - rho * (b * &d).norm_squared();
            moved += weights[i] * dn;
            size += weights[i] * to.xi[i].norm_squared();
        }
        if self.noisy() {
            let w = weights[self.blocks.len()];
            let dn = (&from.slack - &to.slack).norm_squared();
            h += (w - rho) * dn;
            moved += w * dn;
            size += w * to.slack.norm_squared();
        }
        let dl = &from.multiplier - &to.multiplier;
        let dln = dl.norm_squared();
        h += (2.0 - g) / (rho * g * g) * dln + 2.0 / g * dl.dot(&(&from.residual - &to.residual));
        moved += dln / (rho * g);
        size += to.multiplier.norm_squared() / (rho * g);
        (h, moved, size)
    }
}

/// Runs `opts.iterations` Jacobi sweeps from `start`, given in the sharing
/// layout (the `t` entry of the first block is ignored).
///
/// Adaptive rule: a step failing `h ≥ η‖Δu‖²_G` is redone from the same
/// iterate with every `τ̄_i` multiplied by `increase`. After each window of
/// `window` iterations without a rejection whose residual fell below
/// `improvement` times its starting value, the `τ̄_i` shrink by `decrease`,
/// never below `ρ‖R_i‖²`. Rejected attempts count as iterations.
pub fn prox_jadmm_run(
    inst: &BpdInstance,
    partition: &[usize],
    config: &ProxJadmmConfig,
    start: &[DVector<f64>],
    opts: &RunOptions,
    observer: Option<Observer<'_>>,
) -> Result<JadmmOutcome> {
    let sharing = bpd_to_sharing(inst, partition)?;
    sharing.check_primal(start)?;
    let noisy = !inst.is_noise_free();
    let agents = partition.len();
    config.validate(agents + usize::from(noisy))?;
    let rho = config.penalty;

    let mut blocks = Vec::with_capacity(agents);
    let mut col = 0;
    for &ni in partition {
        blocks.push(inst.matrix.columns(col, ni).into_owned());
        col += ni;
    }
    let mut floors: Vec<f64> = blocks.iter().map(|b| rho * spectral_norm(b).powi(2) * (1.0 + FLOOR_MARGIN)).collect();
    if noisy {
        floors.push(rho * (1.0 + FLOOR_MARGIN));
    }
    let clamp = |weights: &mut [f64]| {
        let mut clamped = false;
        for (w, f) in weights.iter_mut().zip(&floors) {
            if *w < *f {
                *w = *f;
                clamped = true;
            }
        }
        clamped
    };
    let mut weights = config.prox_weights.clone();
    if clamp(&mut weights) {
        warn!("proximal weights raised to the positivity floor ρ‖R_i‖²");
    }

    let jadmm = Jadmm { inst, blocks, rho, damping: config.damping };
    let xi: Vec<DVector<f64>> = start.iter().zip(partition).map(|(s, &ni)| s.rows(0, ni).into_owned()).collect();
    let slack = DVector::zeros(inst.m);
    let residual = jadmm.residual(&xi, &slack);
    let mut state = State { xi, slack, multiplier: DVector::zeros(inst.m), residual };

    let to_sharing = |xi: &[DVector<f64>]| -> Vec<DVector<f64>> {
        xi.iter()
            .enumerate()
            .map(|(i, x)| if i == 0 && noisy { x.clone().insert_row(x.len(), inst.eps) } else { x.clone() })
            .collect()
    };

    let mut rejected = 0;
    let mut window_start = state.residual.norm();
    let mut window_len = 0;
    let mut rec = Recorder::new(&sharing, opts, (inst.m, 1), observer);
    for k in 1..=opts.iterations {
        let next = jadmm.step(&state, &weights)?;
        let mut accept = true;
        if config.adaptive {
            let (h, moved, size) = jadmm.contraction(&state, &next, &weights);
            let testable = moved.sqrt() > TEST_FLOOR * (1.0 + size.sqrt());
            if testable && h < config.contraction * moved {
                weights.iter_mut().for_each(|w| *w *= config.increase);
                accept = false;
                rejected += 1;
                window_len = 0;
                window_start = state.residual.norm();
            }
        }
        if accept {
            state = next;
            if config.adaptive {
                window_len += 1;
                if window_len == config.window {
                    let now = state.residual.norm();
                    if now < config.improvement * window_start {
                        weights.iter_mut().for_each(|w| *w *= config.decrease);
                        clamp(&mut weights);
                    }
                    window_len = 0;
                    window_start = now;
                }
            }
        }
        if state.residual.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("Prox-JADMM diverged at k = {k}")));
        }
        let dual = DMatrix::from_column_slice(inst.m, 1, state.multiplier.as_slice());
        rec.record(k, 0, &to_sharing(&state.xi), &dual, None, None);
    }
    let residual = state.residual.norm();
    let dual = DMatrix::from_column_slice(inst.m, 1, state.multiplier.as_slice());
    let trace = rec.finish(opts.iterations, 0, to_sharing(&state.xi), dual, None);
    Ok(JadmmOutcome { trace, prox_weights: weights, residual, slack: state.slack, multiplier: state.multiplier, rejected })
}
