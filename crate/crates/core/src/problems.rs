//! Basis-pursuit-denoising instances, their conic sharing form and reference
//! solutions.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cones::Cone;
use crate::dualbound::SlaterCertificate;
use crate::error::{check_dim, Error, Result};
use crate::prox::ProxOracle;
use crate::seed;
use crate::solver::{restarted_pda, AgentData, ReferenceSolution, RestartSettings, SharingProblem, SmoothTerm};

/// `min ‖ξ‖₁  s.t.  ‖Rξ - r‖ ≤ ε` with a planted sparse signal.
#[derive(Debug, Clone, PartialEq)]
pub struct BpdInstance {
    pub n: usize,
    pub m: usize,
    pub sparsity: usize,
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub eps: f64,
    pub signal: DVector<f64>,
    pub noise_variance: f64,
    pub seed: u64,
}

/// Signal-to-noise ratio in decibels; `None` means noise free.
pub type SnrDb = Option<f64>;

/// Upper `alpha` quantile of the chi-square law with `dof` degrees of freedom.
pub fn chi_square_quantile(dof: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || dof == 0 {
        return Err(Error::InvalidArgument(format!("chi-square quantile needs dof > 0 and alpha in (0, 1), got {dof}, {alpha}")));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    Ok(dist.inverse_cdf(1.0 - alpha))
}

/// Draws an instance: `κ` standard-normal entries on a uniform support,
/// `R` with i.i.d. standard-normal entries, `σ² = κ·10^{-S/10}`,
/// `r = Rξ + η` and `ε = σ·√χ²_{m, 1-α}`.
pub fn gen_bpd(n: usize, m: usize, sparsity: usize, snr_db: SnrDb, alpha: f64, seed: u64) -> Result<BpdInstance> {
    if m == 0 || m >= n {
        return Err(Error::InvalidArgument(format!("need 0 < m < n, got m = {m}, n = {n}")));
    }
    if sparsity == 0 || sparsity > n {
        return Err(Error::InvalidArgument(format!("sparsity {sparsity} outside [1, {n}]")));
    }
    let mut rng = seed::stream(seed, 0, "bpd");
    let mut signal = DVector::zeros(n);
    let mut support = sample(&mut rng, n, sparsity).into_vec();
    support.sort_unstable();
    for j in support {
        signal[j] = StandardNormal.sample(&mut rng);
    }
    let matrix = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
    let mut rhs = &matrix * &signal;
    let (noise_variance, eps) = match snr_db {
        None => (0.0, 0.0),
        Some(s) => {
            let var = sparsity as f64 * 10f64.powf(-s / 10.0);
            let sigma = var.sqrt();
            for v in rhs.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += sigma * z;
            }
            (var, sigma * chi_square_quantile(m, alpha)?.sqrt())
        }
    };
    Ok(BpdInstance { n, m, sparsity, matrix, rhs, eps, signal, noise_variance, seed })
}

/// Norms of `count` noise vectors `η ~ N(0, σ²I_m)`.
pub fn noise_norms(m: usize, sigma: f64, count: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::stream(seed, 0, "noise");
    (0..count)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (sigma * z).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

impl BpdInstance {
    pub fn is_noise_free(&self) -> bool {
        self.eps == 0.0
    }

    /// Header `n m kappa eps seed`, a `# sigma2` comment, the rows of `R`,
    /// then `r`, then the planted signal.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {} {}\n# sigma2 {}\n", self.n, self.m, self.sparsity, self.eps, self.seed, self.noise_variance);
        let line = |out: &mut String, it: &mut dyn Iterator<Item = f64>| {
            let parts: Vec<String> = it.map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", parts.join(" "));
        };
        for i in 0..self.m {
            line(&mut out, &mut self.matrix.row(i).iter().copied());
        }
        line(&mut out, &mut self.rhs.iter().copied());
        line(&mut out, &mut self.signal.iter().copied());
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidArgument(format!("instance text: {msg}"));
        let mut noise_variance = 0.0;
        let mut lines = Vec::new();
        for l in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(rest) = l.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("sigma2") {
                    noise_variance = v.trim().parse().map_err(|_| bad("bad sigma2 comment"))?;
                }
                continue;
            }
            lines.push(l);
        }
        let header: Vec<&str> = lines.first().ok_or_else(|| bad("empty"))?.split_whitespace().collect();
        if header.len() != 5 {
            return Err(bad("header needs `n m kappa eps seed`"));
        }
        let n: usize = header[0].parse().map_err(|_| bad("bad n"))?;
        let m: usize = header[1].parse().map_err(|_| bad("bad m"))?;
        let sparsity: usize = header[2].parse().map_err(|_| bad("bad kappa"))?;
        let eps: f64 = header[3].parse().map_err(|_| bad("bad eps"))?;
        let seed: u64 = header[4].parse().map_err(|_| bad("bad seed"))?;
        if lines.len() != m + 3 {
            return Err(bad(&format!("expected {} data lines, found {}", m + 2, lines.len() - 1)));
        }
        let parse_row = |l: &str, len: usize| -> Result<Vec<f64>> {
            let row: Vec<f64> = l
                .split_whitespace()
                .map(|s| s.parse::<f64>().map_err(|_| bad("bad number")))
                .collect::<Result<_>>()?;
            check_dim(len, row.len())?;
            Ok(row)
        };
        let mut data = Vec::with_capacity(m * n);
        for l in &lines[1..=m] {
            data.extend(parse_row(l, n)?);
        }
        let matrix = DMatrix::from_row_slice(m, n, &data);
        let rhs = DVector::from_vec(parse_row(lines[m + 1], m)?);
        let signal = DVector::from_vec(parse_row(lines[m + 2], n)?);
        Ok(Self { n, m, sparsity, matrix, rhs, eps, signal, noise_variance, seed })
    }

    /// Minimum-norm solution of `Rξ = r`.
    pub fn least_norm_solution(&self) -> Result<DVector<f64>> {
        let rrt = &self.matrix * self.matrix.transpose();
        let z = rrt
            .cholesky()
            .ok_or_else(|| Error::Numerical("R Rᵀ is not positive definite".into()))?
            .solve(&self.rhs);
        Ok(self.matrix.transpose() * z)
    }
}

/// Equal split of `n` columns over `agents` blocks, earlier blocks taking the
/// remainder.
pub fn even_partition(n: usize, agents: usize) -> Result<Vec<usize>> {
    if agents == 0 || agents > n {
        return Err(Error::InvalidArgument(format!("cannot split {n} columns over {agents} agents")));
    }
    Ok((0..agents).map(|i| n / agents + usize::from(i < n % agents)).collect())
}

/// Conic sharing form. Agent `i` owns a block of columns and the offset
/// `r/N`. With noise, the first agent also owns the scalar `t` (prox: the
/// indicator of `{ε}`) and the cone is `SOC(m + 1)` on `(Σ R_i ξ_i - r, t)`.
/// Without noise the cone is `{0} ⊂ ℝ^m` and `t` is dropped.
pub fn bpd_to_sharing(inst: &BpdInstance, partition: &[usize]) -> Result<SharingProblem> {
    if partition.iter().sum::<usize>() != inst.n || partition.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "partition {partition:?} does not split {} columns into nonempty blocks",
            inst.n
        )));
    }
    let agents_n = partition.len() as f64;
    let noisy = !inst.is_noise_free();
    let m = inst.m;
    let rows = if noisy { m + 1 } else { m };
    let mut col = 0;
    let mut agents = Vec::with_capacity(partition.len());
    for (i, &ni) in partition.iter().enumerate() {
        let block = inst.matrix.columns(col, ni);
        col += ni;
        let owns_t = noisy && i == 0;
        let cols = if owns_t { ni + 1 } else { ni };
        let mut coupling = DMatrix::zeros(rows, cols);
        coupling.view_mut((0, 0), (m, ni)).copy_from(&block);
        let mut offset = DVector::zeros(rows);
        offset.rows_mut(0, m).copy_from(&(&inst.rhs / agents_n));
        let prox = if owns_t {
            coupling[(m, ni)] = 1.0;
            ProxOracle::Separable(vec![(ni, ProxOracle::L1Norm), (1, ProxOracle::IndicatorPoint(inst.eps))])
        } else {
            ProxOracle::L1Norm
        };
        agents.push(AgentData::new(coupling, offset, SmoothTerm::Zero, prox)?);
    }
    let cone = if noisy { Cone::SecondOrder(m + 1) } else { Cone::Zero(m) };
    SharingProblem::new(cone, agents)
}

/// Splits a length-`n` signal into agent blocks, appending `t = ε` to the
/// first block in the noisy case.
pub fn bpd_blocks(inst: &BpdInstance, partition: &[usize], x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    check_dim(inst.n, x.len())?;
    let mut col = 0;
    Ok(partition
        .iter()
        .enumerate()
        .map(|(i, &ni)| {
            let mut b: Vec<f64> = x.rows(col, ni).iter().copied().collect();
            col += ni;
            if i == 0 && !inst.is_noise_free() {
                b.push(inst.eps);
            }
            DVector::from_vec(b)
        })
        .collect())
}

/// Slater point for the noisy form: the minimum-norm solution of `Rξ = r`
/// with `t = ε`, and `q = 0` as the dual lower value.
pub fn bpd_slater_certificate(inst: &BpdInstance, partition: &[usize], problem: &SharingProblem) -> Result<SlaterCertificate> {
    if inst.is_noise_free() {
        return Err(Error::NoSlaterPoint("noise-free instance has an equality constraint".into()));
    }
    let x = inst.least_norm_solution()?;
    SlaterCertificate::from_point(problem, bpd_blocks(inst, partition, &x)?, 0.0)
}

/// Entries drawn i.i.d. uniform on `[0, 1)`.
pub fn uniform_start<R: Rng>(problem: &SharingProblem, rng: &mut R) -> Vec<DVector<f64>> {
    problem
        .dims()
        .iter()
        .map(|&d| DVector::from_fn(d, |_, _| rng.random::<f64>()))
        .collect()
}

/// Reference `(ξ*, y*, φ*)` from the restarted centralized method, started at
/// zero. `tol` bounds the scaled fixed-point residual.
pub fn reference_solution(problem: &SharingProblem, tol: f64) -> Result<ReferenceSolution> {
    let start: Vec<DVector<f64>> = problem.dims().iter().map(|&d| DVector::zeros(d)).collect();
    let settings = RestartSettings { tolerance: tol, ..RestartSettings::default() };
    restarted_pda(problem, &start, &settings)
}

/// Exhaustive oracle for `min ‖ξ‖₁ s.t. ‖Rξ - r‖ ≤ ε` on tiny instances.
///
/// Some optimum has at most `m` nonzeros, so every support of size `≤ m` and
/// every sign pattern on it is tried; for fixed signs `s` the restricted
/// problem has the closed-form solution `ξ_S = G⁻¹(R_Sᵀr - s/μ)` with `μ`
/// chosen to put the residual on the sphere of radius `ε` (or `ε = 0`:
/// `R_S ξ_S = r` exactly). Returns the best sign-consistent candidate.
pub fn support_enumeration_l1(matrix: &DMatrix<f64>, rhs: &DVector<f64>, eps: f64) -> Result<(DVector<f64>, f64)> {
    let (m, n) = matrix.shape();
    check_dim(m, rhs.len())?;
    if n > 20 {
        return Err(Error::InvalidArgument(format!("support enumeration is limited to n <= 20, got {n}")));
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    let mut consider = |x: DVector<f64>| {
        let val = x.iter().map(|v| v.abs()).sum::<f64>();
        if best.as_ref().is_none_or(|b| val < b.1) {
            best = Some((x, val));
        }
    };
    if rhs.norm() <= eps {
        consider(DVector::zeros(n));
    }
    let scale = 1.0 + rhs.norm();
    for mask in 1u32..(1u32 << n) {
        let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        if support.len() > m {
            continue;
        }
        let rs = matrix.select_columns(&support);
        let gram = rs.transpose() * &rs;
        let Some(chol) = gram.clone().cholesky() else { continue };
        if gram.symmetric_eigenvalues().min() < 1e-10 * gram.norm() {
            continue;
        }
        let ls = chol.solve(&(rs.transpose() * rhs));
        let place = |xs: &DVector<f64>| {
            let mut x = DVector::zeros(n);
            for (k, &j) in support.iter().enumerate() {
                x[j] = xs[k];
            }
            x
        };
        if eps == 0.0 {
            if (&rs * &ls - rhs).norm() <= 1e-9 * scale {
                consider(place(&ls));
            }
            continue;
        }
        let perp2 = (&rs * &ls - rhs).norm_squared();
        if perp2 >= eps * eps {
            continue;
        }
        for signs in 0u32..(1u32 << support.len()) {
            let s = DVector::from_fn(support.len(), |k, _| if signs & (1 << k) != 0 { -1.0 } else { 1.0 });
            let gs = chol.solve(&s);
            // ‖R_S G⁻¹ s‖² = sᵀG⁻¹s.
            let a2 = s.dot(&gs);
            let inv_mu = ((eps * eps - perp2) / a2).sqrt();
            let xs = &ls - &gs * inv_mu;
            if xs.iter().zip(s.iter()).all(|(x, sg)| x * sg >= -1e-12) {
                consider(place(&xs));
            }
        }
    }
    best.ok_or_else(|| Error::Numerical("no feasible support found".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Simpson integration of the chi-square density, inverted by bisection.
    fn chi_square_quantile_oracle(k: usize, p: f64) -> f64 {
        let half = k as f64 / 2.0;
        let log_norm = half * 2f64.ln() + statrs::function::gamma::ln_gamma(half);
        let pdf = |x: f64| if x <= 0.0 { 0.0 } else { ((half - 1.0) * x.ln() - x / 2.0 - log_norm).exp() };
        // Substituting x = u² removes the singularity at the origin.
        let integrand = |u: f64| if u == 0.0 && k == 1 { 2.0 * (-log_norm).exp() } else { 2.0 * u * pdf(u * u) };
        let cdf = |x: f64| {
            let steps = 20_000;
            let b = x.sqrt();
            let h = b / steps as f64;
            let mut s = integrand(0.0) + integrand(b);
            for i in 1..steps {
                s += integrand(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            s * h / 3.0
        };
        let (mut lo, mut hi) = (0.0, 200.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn chi_square_quantile_matches_integration_oracle() {
        let oracle = chi_square_quantile_oracle(20, 0.95);
        assert!((oracle - 31.410432844230918).abs() < 1e-6, "oracle {oracle}");
        let q = chi_square_quantile(20, 0.05).unwrap();
        assert!((q - 31.410432844230918).abs() < 1e-8);
        assert!((q.sqrt() - 5.6045).abs() < 1e-3);
        for k in [1, 2, 3, 21] {
            assert!((chi_square_quantile(k, 0.05).unwrap() - chi_square_quantile_oracle(k, 0.95)).abs() < 1e-5);
        }
        assert!(chi_square_quantile(20, 1.0).is_err());
    }

    #[test]
    fn generation_examples() {
        let inst = gen_bpd(120, 20, 20, Some(30.0), 0.05, 1).unwrap();
        assert!((inst.noise_variance - 0.02).abs() < 1e-15);
        assert_eq!(inst.signal.iter().filter(|v| **v != 0.0).count(), 20);
        let expected_eps = 0.02f64.sqrt() * chi_square_quantile(20, 0.05).unwrap().sqrt();
        assert!((inst.eps - expected_eps).abs() < 1e-15);

        let clean = gen_bpd(120, 20, 20, None, 0.05, 1).unwrap();
        assert_eq!(clean.eps, 0.0);
        assert!((&clean.matrix * &clean.signal - &clean.rhs).norm() == 0.0);

        assert_eq!(gen_bpd(120, 20, 20, Some(30.0), 0.05, 9).unwrap(), gen_bpd(120, 20, 20, Some(30.0), 0.05, 9).unwrap());
        assert!(gen_bpd(10, 10, 2, None, 0.05, 0).is_err());
        assert!(gen_bpd(10, 5, 11, None, 0.05, 0).is_err());
    }

    #[test]
    fn sharing_form_blocks() {
        let inst = gen_bpd(120, 20, 20, Some(30.0), 0.05, 2).unwrap();
        let part = even_partition(120, 10).unwrap();
        assert_eq!(part, vec![12; 10]);
        let p = bpd_to_sharing(&inst, &part).unwrap();
        assert_eq!(p.cone(), &Cone::SecondOrder(21));
        let t = p.stacked_coupling();
        assert_eq!(t.view((0, 0), (20, 12)), inst.matrix.columns(0, 12));
        assert_eq!(t.view((0, 13), (20, 108)), inst.matrix.columns(12, 108));
        assert_eq!(t[(20, 12)], 1.0);
        assert!((p.total_offset().rows(0, 20) - &inst.rhs).norm() < 1e-12 * inst.rhs.norm());

        let single = bpd_to_sharing(&inst, &[120]).unwrap();
        let x = DVector::from_fn(120, |i, _| (i as f64).cos());
        let blocks = bpd_blocks(&inst, &[120], &x).unwrap();
        let g = single.constraint_image(&blocks);
        assert!((g.rows(0, 20) - (&inst.matrix * &x - &inst.rhs)).norm() < 1e-12);
        assert_eq!(g[20], inst.eps);
        assert_eq!(single.objective(&blocks), x.iter().map(|v| v.abs()).sum::<f64>());

        assert!(bpd_to_sharing(&inst, &[60, 59]).is_err());
        let clean = gen_bpd(30, 6, 3, None, 0.05, 2).unwrap();
        assert_eq!(bpd_to_sharing(&clean, &[15, 15]).unwrap().cone(), &Cone::Zero(6));
    }

    #[test]
    fn planted_signal_is_feasible_when_noise_is_inside_the_ball() {
        let mut inside = 0;
        for s in 0..40 {
            let inst = gen_bpd(40, 8, 4, Some(20.0), 0.05, s).unwrap();
            let noise = (&inst.rhs - &inst.matrix * &inst.signal).norm();
            let part = even_partition(40, 4).unwrap();
            let p = bpd_to_sharing(&inst, &part).unwrap();
            let blocks = bpd_blocks(&inst, &part, &inst.signal).unwrap();
            let feasible = p.cone().contains(&p.constraint_image(&blocks)).unwrap();
            assert_eq!(feasible, noise <= inst.eps);
            inside += usize::from(feasible);
        }
        assert!(inside >= 30);
    }

    #[test]
    fn text_round_trip() {
        let inst = gen_bpd(12, 4, 3, Some(25.0), 0.05, 5).unwrap();
        let text = inst.to_text();
        assert!(text.starts_with(&format!("12 4 3 {} 5\n", inst.eps)));
        assert_eq!(BpdInstance::from_text(&text).unwrap(), inst);
        assert!(BpdInstance::from_text("12 4 3 0.1\n").is_err());
    }

    #[test]
    fn slater_point_is_interior() {
        let inst = gen_bpd(30, 6, 3, Some(30.0), 0.05, 4).unwrap();
        let part = even_partition(30, 3).unwrap();
        let p = bpd_to_sharing(&inst, &part).unwrap();
        let cert = bpd_slater_certificate(&inst, &part, &p).unwrap();
        assert!(cert.image.rows(0, 6).norm() < 1e-9);
        assert_eq!(cert.image[6], inst.eps);
        let clean = gen_bpd(30, 6, 3, None, 0.05, 4).unwrap();
        assert!(bpd_slater_certificate(&clean, &part, &bpd_to_sharing(&clean, &part).unwrap()).is_err());
    }

    #[test]
    fn enumeration_oracle_on_hand_cases() {
        // min |a| + |b| s.t. a + 2b = 2  →  b = 1.
        let r = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let (x, v) = support_enumeration_l1(&r, &DVector::from_element(1, 2.0), 0.0).unwrap();
        assert_eq!(v, 1.0);
        assert!((x[1] - 1.0).abs() < 1e-15);
        // With ε = 0.5 the constraint |a + 2b - 2| ≤ 0.5 gives b = 0.75.
        let (x, v) = support_enumeration_l1(&r, &DVector::from_element(1, 2.0), 0.5).unwrap();
        assert!((v - 0.75).abs() < 1e-12 && (x[1] - 0.75).abs() < 1e-12);
        let (_, v) = support_enumeration_l1(&r, &DVector::from_element(1, 0.4), 0.5).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn reference_toy_problem() {
        let a = AgentData::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, 1.0),
            SmoothTerm::Quadratic { hessian: DMatrix::from_element(1, 1, 1.0), linear: DVector::zeros(1) },
            ProxOracle::Zero,
        )
        .unwrap();
        let p = SharingProblem::new(Cone::NonnegOrthant(1), vec![a]).unwrap();
        let s = reference_solution(&p, 1e-12).unwrap();
        assert!((s.primal[0][0] - 1.0).abs() < 1e-9);
        assert!((s.dual[0] + 1.0).abs() < 1e-9);
        assert!((s.objective - 0.5).abs() < 1e-9);
    }

    #[test]
    fn reference_matches_enumeration_on_tiny_instances() {
        for (seed, snr) in [(1, None), (2, None), (3, Some(10.0)), (4, Some(20.0))] {
            let inst = gen_bpd(6, 3, 2, snr, 0.05, seed).unwrap();
            let (_, oracle) = support_enumeration_l1(&inst.matrix, &inst.rhs, inst.eps).unwrap();
            let p = bpd_to_sharing(&inst, &[6]).unwrap();
            let s = reference_solution(&p, 1e-11).unwrap();
            assert!((s.objective - oracle).abs() < 1e-6, "seed {seed}: {} vs {oracle}", s.objective);
            let image = p.constraint_image(&s.primal);
            assert!(image.rows(0, 3).norm() <= inst.eps + 1e-8);
        }
    }
}
