//! Cone geometry: Euclidean projections onto closed convex cones, their polars,
//! and polar-cone/ball intersections.
//!
//! Second-order cones use the layout `(y, t)` with the vector part first and the
//! scalar part last, i.e. `{(y, t) : ‖y‖ ≤ t}`. Product cones concatenate their
//! components in order.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::prox::project_ball;

/// Membership tolerance used by [`Cone::contains`] and the distance tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cone {
    /// `{0} ⊂ ℝ^dim`; its polar is all of `ℝ^dim`.
    Zero(usize),
    /// `ℝ^dim_+`; its polar is the nonpositive orthant.
    NonnegOrthant(usize),
    /// `{(y, t) ∈ ℝ^(dim-1) × ℝ : ‖y‖ ≤ t}`, `dim ≥ 2`.
    SecondOrder(usize),
    /// Cartesian product of the listed cones.
    Product(Vec<Cone>),
}

impl Cone {
    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        match self {
            Cone::Zero(d) | Cone::NonnegOrthant(d) | Cone::SecondOrder(d) => *d,
            Cone::Product(parts) => parts.iter().map(Cone::dim).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Cone::Zero(0) | Cone::NonnegOrthant(0) => {
                Err(Error::InvalidArgument("cone dimension must be positive".into()))
            }
            Cone::SecondOrder(d) if *d < 2 => Err(Error::InvalidArgument(format!(
                "second-order cone needs dimension >= 2, got {d}"
            ))),
            Cone::Product(parts) if parts.is_empty() => {
                Err(Error::InvalidArgument("empty product cone".into()))
            }
            Cone::Product(parts) => parts.iter().try_for_each(Cone::validate),
            _ => Ok(()),
        }
    }

    /// Euclidean projection onto the cone.
    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.dim(), y.len())?;
        let mut out = DVector::zeros(y.len());
        self.project_into(y.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// Euclidean projection onto the polar cone, computed as `y - P_K(y)`.
    pub fn project_polar(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let p = self.project(y)?;
        Ok(y - p)
    }

    /// `‖P_K(y) - y‖`.
    pub fn dist(&self, y: &DVector<f64>) -> Result<f64> {
        let p = self.project(y)?;
        Ok((p - y).norm())
    }

    pub fn contains(&self, y: &DVector<f64>) -> Result<bool> {
        Ok(self.dist(y)? <= MEMBERSHIP_TOL)
    }

    /// Projection onto `K° ∩ {‖x‖ ≤ radius}`.
    ///
    /// Exact because the ball is centered at the origin and `K°` is a cone: scaling
    /// the polar projection radially keeps it in `K°`.
    pub fn project_polar_ball(&self, radius: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        let polar = self.project_polar(y)?;
        project_ball(radius, &polar)
    }

    pub(crate) fn project_into(&self, y: &[f64], out: &mut [f64]) {
        match self {
            Cone::Zero(_) => out.fill(0.0),
            Cone::NonnegOrthant(_) => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v.max(0.0);
                }
            }
            Cone::SecondOrder(d) => project_soc(&y[..*d], &mut out[..*d]),
            Cone::Product(parts) => {
                let mut offset = 0;
                for part in parts {
                    let d = part.dim();
                    part.project_into(&y[offset..offset + d], &mut out[offset..offset + d]);
                    offset += d;
                }
            }
        }
    }

    /// In-place variant of [`Cone::project_polar_ball`] used inside solver loops.
    pub(crate) fn project_polar_ball_in_place(&self, radius: f64, y: &mut [f64]) {
        let mut p = vec![0.0; y.len()];
        self.project_into(y, &mut p);
        for (v, pv) in y.iter_mut().zip(&p) {
            *v -= pv;
        }
        clamp_norm(radius, y);
    }

    pub(crate) fn project_polar_in_place(&self, y: &mut [f64]) {
        let mut p = vec![0.0; y.len()];
        self.project_into(y, &mut p);
        for (v, pv) in y.iter_mut().zip(&p) {
            *v -= pv;
        }
    }
}

pub(crate) fn clamp_norm(radius: f64, y: &mut [f64]) {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > radius {
        let scale = radius / norm;
        y.iter_mut().for_each(|v| *v *= scale);
    }
}

// Three cases: inside the cone, inside the polar cone, or onto the boundary ray
// through the normalized vector part.
fn project_soc(y: &[f64], out: &mut [f64]) {
    let d = y.len();
    let t = y[d - 1];
    let head = &y[..d - 1];
    let norm = head.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= t {
        out.copy_from_slice(y);
    } else if norm <= -t {
        out.fill(0.0);
    } else {
        let alpha = 0.5 * (t + norm);
        for (o, v) in out[..d - 1].iter_mut().zip(head) {
            *o = alpha * v / norm;
        }
        out[d - 1] = alpha;
    }
}
