//! Dual-norm bounds from a Slater point: `‖y*‖ ≤ (φ(ξ̄) - q)/r̃`, where `r̃`
//! lower-bounds the radius of the largest ball around `g(ξ̄)` inside the cone.

use nalgebra::DVector;

use crate::cones::Cone;
use crate::error::{check_dim, Error, Result};
use crate::solver::SharingProblem;

/// Smallest bound returned by [`dual_bound`].
pub const DUAL_BOUND_FLOOR: f64 = 1e-6;

/// A strictly feasible point with its constraint image, objective value and a
/// known lower bound on the optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct SlaterCertificate {
    pub point: Vec<DVector<f64>>,
    pub image: DVector<f64>,
    pub objective: f64,
    pub lower: f64,
}

impl SlaterCertificate {
    /// Evaluates `point` on `problem`. Interiority is checked later by
    /// [`dual_bound`].
    pub fn from_point(problem: &SharingProblem, point: Vec<DVector<f64>>, lower: f64) -> Result<Self> {
        problem.check_primal(&point)?;
        let image = problem.constraint_image(&point);
        let objective = problem.objective(&point);
        if !objective.is_finite() {
            return Err(Error::NoSlaterPoint("objective is infinite at the candidate point".into()));
        }
        Ok(Self { point, image, objective, lower })
    }
}

/// `min { wᵀg : ‖w‖₁ = 1, w ∈ K* }`, a lower bound on the inscribed radius.
///
/// Orthant: `min_j g_j`. Second-order cone with `g = (g_y, g_t)`: the root in
/// `[0, g_t)` of `g_t - λ = ‖|g_y| + λ1‖`. Products take the minimum over
/// components.
pub fn interior_radius(cone: &Cone, gbar: &DVector<f64>) -> Result<f64> {
    check_dim(cone.dim(), gbar.len())?;
    radius_slice(cone, gbar.as_slice())
}

fn radius_slice(cone: &Cone, g: &[f64]) -> Result<f64> {
    let r = match cone {
        Cone::Zero(_) => return Err(Error::EmptyInterior),
        Cone::NonnegOrthant(_) => g.iter().copied().fold(f64::INFINITY, f64::min),
        Cone::SecondOrder(d) => soc_radius(&g[..d - 1], g[d - 1]),
        Cone::Product(parts) => {
            let mut offset = 0;
            let mut best = f64::INFINITY;
            for part in parts {
                let d = part.dim();
                best = best.min(radius_slice(part, &g[offset..offset + d])?);
                offset += d;
            }
            best
        }
    };
    if r > 0.0 {
        Ok(r)
    } else {
        Err(Error::NoSlaterPoint(format!("point is not strictly inside the cone (margin {r:e})")))
    }
}

fn soc_radius(head: &[f64], t: f64) -> f64 {
    let norm2: f64 = head.iter().map(|v| v * v).sum();
    let margin = t - norm2.sqrt();
    if margin <= 0.0 {
        return margin;
    }
    // (d-1)λ² + 2(Σa + t)λ + (‖a‖² - t²) = 0, positive root in rationalized form.
    let d = head.len() as f64;
    let sum: f64 = head.iter().map(|v| v.abs()).sum();
    let b = sum + t;
    let c = t * t - norm2;
    c / (b + (b * b + (d - 1.0) * c).sqrt())
}

/// `B = max((φ(ξ̄) - q)/r̃, floor)`.
pub fn dual_bound(cert: &SlaterCertificate, cone: &Cone) -> Result<f64> {
    let r = interior_radius(cone, &cert.image)?;
    if cert.objective < cert.lower {
        return Err(Error::InconsistentCertificate { objective: cert.objective, lower: cert.lower });
    }
    Ok(((cert.objective - cert.lower) / r).max(DUAL_BOUND_FLOOR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    // Minimizes wᵀg over boundary rays w = (u, ‖u‖) of the self-dual cone,
    // normalized to ‖w‖₁ = 1, by sweeping directions of u.
    fn soc_radius_sweep(g: &[f64]) -> f64 {
        let d = g.len() - 1;
        let t = g[d];
        let eval = |u: &[f64]| {
            let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let l1 = u.iter().map(|x| x.abs()).sum::<f64>() + n;
            (u.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() + n * t) / l1
        };
        match d {
            1 => eval(&[1.0]).min(eval(&[-1.0])),
            2 => (0..200_000)
                .map(|i| {
                    let th = i as f64 * std::f64::consts::TAU / 200_000.0;
                    eval(&[th.cos(), th.sin()])
                })
                .fold(f64::INFINITY, f64::min),
            _ => {
                let steps = 400;
                let mut best = f64::INFINITY;
                for i in 0..=steps {
                    let th = i as f64 * std::f64::consts::PI / steps as f64;
                    for j in 0..2 * steps {
                        let ph = j as f64 * std::f64::consts::PI / steps as f64;
                        best = best.min(eval(&[th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]));
                    }
                }
                best
            }
        }
    }

    #[test]
    fn orthant_examples() {
        assert_eq!(interior_radius(&Cone::NonnegOrthant(3), &v(&[1.0, 2.0, 3.0])).unwrap(), 1.0);
        assert_eq!(interior_radius(&Cone::NonnegOrthant(2), &v(&[5.0, 5.0])).unwrap(), 5.0);
        assert!(matches!(
            interior_radius(&Cone::NonnegOrthant(2), &v(&[0.0, 5.0])),
            Err(Error::NoSlaterPoint(_))
        ));
        let cert = SlaterCertificate { point: vec![], image: v(&[1.0, 2.0, 3.0]), objective: 5.0, lower: -1.0 };
        assert_eq!(dual_bound(&cert, &Cone::NonnegOrthant(3)).unwrap(), 6.0);
        let bad = SlaterCertificate { objective: -2.0, ..cert.clone() };
        assert!(matches!(dual_bound(&bad, &Cone::NonnegOrthant(3)), Err(Error::InconsistentCertificate { .. })));
        let tight = SlaterCertificate { objective: -1.0, ..cert };
        assert_eq!(dual_bound(&tight, &Cone::NonnegOrthant(3)).unwrap(), DUAL_BOUND_FLOOR);
    }

    #[test]
    fn soc_examples() {
        let sweep = soc_radius_sweep(&[0.0, 1.0]);
        assert!((sweep - 0.5).abs() < 1e-12);
        assert!((interior_radius(&Cone::SecondOrder(2), &v(&[0.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);

        let eps = 0.3;
        let mut g = vec![0.0; 21];
        g[20] = eps;
        let r = interior_radius(&Cone::SecondOrder(21), &v(&g)).unwrap();
        assert!((r - eps / (1.0 + 20f64.sqrt())).abs() < 1e-15);

        assert!(matches!(interior_radius(&Cone::Zero(3), &v(&[0.0; 3])), Err(Error::EmptyInterior)));
        assert!(interior_radius(&Cone::SecondOrder(3), &v(&[3.0, 4.0, 5.0])).is_err());
    }

    #[test]
    fn soc_closed_form_matches_direction_sweep() {
        let cases: [&[f64]; 6] = [
            &[0.3, 1.0],
            &[-0.7, 1.0],
            &[0.2, -0.1, 0.5],
            &[0.0, 0.0, 2.0],
            &[0.1, 0.2, -0.3, 1.0],
            &[0.0, 0.0, 0.0, 1.0],
        ];
        for g in cases {
            let sweep = soc_radius_sweep(g);
            let exact = interior_radius(&Cone::SecondOrder(g.len()), &v(g)).unwrap();
            assert!(exact <= sweep + 1e-12, "{g:?}: closed form {exact} above sweep {sweep}");
            assert!(sweep - exact < 1e-4, "{g:?}: closed form {exact}, sweep {sweep}");
        }
    }

    #[test]
    fn product_takes_minimum() {
        let k = Cone::Product(vec![Cone::NonnegOrthant(2), Cone::SecondOrder(2)]);
        assert!((interior_radius(&k, &v(&[2.0, 3.0, 0.0, 1.0])).unwrap() - 0.5).abs() < 1e-15);
        assert!(interior_radius(&Cone::Product(vec![Cone::NonnegOrthant(1), Cone::Zero(1)]), &v(&[1.0, 0.0])).is_err());
    }

    proptest! {
        #[test]
        fn orthant_radius_is_min_entry(g in prop::collection::vec(0.001..10.0f64, 1..8)) {
            let r = interior_radius(&Cone::NonnegOrthant(g.len()), &v(&g)).unwrap();
            prop_assert_eq!(r, g.iter().copied().fold(f64::INFINITY, f64::min));
        }

        #[test]
        fn radius_is_positively_homogeneous(head in prop::collection::vec(-1.0..1.0f64, 1..5), slack in 0.01..2.0f64, lambda in 1.0..50.0f64) {
            let mut g = head.clone();
            g.push(v(&head).norm() + slack);
            let k = Cone::SecondOrder(g.len());
            let r1 = interior_radius(&k, &v(&g)).unwrap();
            let scaled: Vec<f64> = g.iter().map(|x| x * lambda).collect();
            let r2 = interior_radius(&k, &v(&scaled)).unwrap();
            prop_assert!((r2 - lambda * r1).abs() <= 1e-12 * r2.max(1.0));
        }

        #[test]
        fn radius_never_exceeds_inscribed_ball(head in prop::collection::vec(-1.0..1.0f64, 1..5), slack in 0.01..2.0f64) {
            let mut g = head.clone();
            let n = v(&head).norm();
            g.push(n + slack);
            let r = interior_radius(&Cone::SecondOrder(g.len()), &v(&g)).unwrap();
            let inscribed = (g[g.len() - 1] - n) / 2f64.sqrt();
            prop_assert!(r <= inscribed * (1.0 + 1e-12));
        }
    }
}
