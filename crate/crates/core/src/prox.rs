//! Proximal maps for the nonsmooth agent terms.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Tolerance for deciding that a coordinate sits at an indicator's point.
pub const INDICATOR_TOL: f64 = 1e-9;

/// Closed-form proximal oracle `x ↦ argmin_z ρ(z) + ‖z - x‖² / (2τ)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxOracle {
    /// `ρ = 0`; the prox is the identity.
    Zero,
    /// `ρ = ‖·‖₁`.
    L1Norm,
    /// Indicator of the point `(v, …, v)`.
    IndicatorPoint(f64),
    /// Block-separable sum: each entry owns the given number of consecutive
    /// coordinates.
    Separable(Vec<(usize, ProxOracle)>),
}

impl ProxOracle {
    /// Number of coordinates covered by a separable oracle; `None` for the
    /// dimension-free variants.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            ProxOracle::Separable(blocks) => Some(blocks.iter().map(|(d, _)| d).sum()),
            _ => None,
        }
    }

    pub fn apply(&self, x: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
        check_step(tau)?;
        if let Some(d) = self.fixed_dim() {
            crate::error::check_dim(d, x.len())?;
        }
        let mut out = x.clone();
        self.apply_in_place(out.as_mut_slice(), tau);
        Ok(out)
    }

    pub(crate) fn apply_in_place(&self, x: &mut [f64], tau: f64) {
        match self {
            ProxOracle::Zero => {}
            ProxOracle::L1Norm => {
                if tau > 0.0 {
                    x.iter_mut().for_each(|v| *v = shrink(*v, tau));
                }
            }
            ProxOracle::IndicatorPoint(p) => x.fill(*p),
            ProxOracle::Separable(blocks) => {
                let mut offset = 0;
                for (d, block) in blocks {
                    block.apply_in_place(&mut x[offset..offset + d], tau);
                    offset += d;
                }
            }
        }
    }

    /// `ρ(x)`, with `+∞` off an indicator's point.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ProxOracle::Zero => 0.0,
            ProxOracle::L1Norm => x.iter().map(|v| v.abs()).sum(),
            ProxOracle::IndicatorPoint(p) => {
                if x.iter().all(|v| (v - p).abs() <= INDICATOR_TOL) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxOracle::Separable(blocks) => {
                let mut offset = 0;
                let mut total = 0.0;
                for (d, block) in blocks {
                    total += block.value(&x[offset..offset + d]);
                    offset += d;
                }
                total
            }
        }
    }

    /// `ρ(x)` with indicator terms ignored. Used where iterates only approach
    /// the indicator's point asymptotically.
    pub fn finite_part(&self, x: &[f64]) -> f64 {
        match self {
            ProxOracle::IndicatorPoint(_) => 0.0,
            ProxOracle::Separable(blocks) => {
                let mut offset = 0;
                let mut total = 0.0;
                for (d, block) in blocks {
                    total += block.finite_part(&x[offset..offset + d]);
                    offset += d;
                }
                total
            }
            other => other.value(x),
        }
    }
}

fn check_step(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("prox step must be finite and >= 0, got {tau}")))
    }
}

#[inline]
fn shrink(v: f64, tau: f64) -> f64 {
    v.signum() * (v.abs() - tau).max(0.0)
}

/// Componentwise `sign(x)·max(|x| - τ, 0)`. `τ = 0` returns `x` unchanged.
pub fn soft_threshold(x: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    ProxOracle::L1Norm.apply(x, tau)
}

/// Prox of the indicator of `{value}`: always `value`.
pub fn prox_indicator_point(_x: f64, value: f64) -> f64 {
    value
}

/// `y·min{1, radius/‖y‖}`.
pub fn project_ball(radius: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("ball radius must be positive, got {radius}")));
    }
    let mut out = y.clone();
    crate::cones::clamp_norm(radius, out.as_mut_slice());
    Ok(out)
}
