use nalgebra::{DMatrix, DVector};

use crate::cones::Cone;
use crate::error::{check_dim, Error, Result};
use crate::prox::ProxOracle;

/// Smooth part `f_i` of an agent objective.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothTerm {
    Zero,
    /// `½ xᵀHx + cᵀx` with `H` symmetric positive semidefinite.
    Quadratic { hessian: DMatrix<f64>, linear: DVector<f64> },
}

impl SmoothTerm {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            SmoothTerm::Zero => 0.0,
            SmoothTerm::Quadratic { hessian, linear } => 0.5 * x.dot(&(hessian * x)) + linear.dot(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SmoothTerm::Zero => DVector::zeros(x.len()),
            SmoothTerm::Quadratic { hessian, linear } => hessian * x + linear,
        }
    }

    /// Adds `scale·∇f(x)` to `out`.
    pub(crate) fn add_gradient(&self, x: &DVector<f64>, scale: f64, out: &mut DVector<f64>) {
        if let SmoothTerm::Quadratic { hessian, linear } = self {
            out.gemv(scale, hessian, x, 1.0);
            out.axpy(scale, linear, 1.0);
        }
    }

    /// Lipschitz constant of the gradient (largest Hessian eigenvalue).
    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothTerm::Zero => 0.0,
            SmoothTerm::Quadratic { hessian, .. } => hessian
                .clone()
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(0.0, f64::max),
        }
    }
}

/// Data held privately by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentData {
    coupling: DMatrix<f64>,
    offset: DVector<f64>,
    smooth: SmoothTerm,
    prox: ProxOracle,
    lipschitz: f64,
    op_norm: f64,
}

impl AgentData {
    pub fn new(coupling: DMatrix<f64>, offset: DVector<f64>, smooth: SmoothTerm, prox: ProxOracle) -> Result<Self> {
        check_dim(coupling.nrows(), offset.len())?;
        let n = coupling.ncols();
        if n == 0 {
            return Err(Error::InvalidArgument("agent needs at least one variable".into()));
        }
        if let SmoothTerm::Quadratic { hessian, linear } = &smooth {
            check_dim(n, hessian.nrows())?;
            check_dim(n, hessian.ncols())?;
            check_dim(n, linear.len())?;
            if (hessian - hessian.transpose()).abs().max() > 1e-12 * (1.0 + hessian.abs().max()) {
                return Err(Error::InvalidArgument("Hessian must be symmetric".into()));
            }
        }
        if let Some(d) = prox.fixed_dim() {
            check_dim(n, d)?;
        }
        let lipschitz = smooth.lipschitz();
        let op_norm = spectral_norm(&coupling);
        Ok(Self { coupling, offset, smooth, prox, lipschitz, op_norm })
    }

    pub fn dim(&self) -> usize {
        self.coupling.ncols()
    }

    pub fn coupling(&self) -> &DMatrix<f64> {
        &self.coupling
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn smooth(&self) -> &SmoothTerm {
        &self.smooth
    }

    pub fn prox(&self) -> &ProxOracle {
        &self.prox
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Spectral norm of the coupling matrix.
    pub fn op_norm(&self) -> f64 {
        self.op_norm
    }

    /// `ρ_i(x) + f_i(x)`; infinite off an indicator's point.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.prox.value(x.as_slice()) + self.smooth.value(x)
    }
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// `min Σ_i φ_i(ξ_i)  s.t.  Σ_i (R_i ξ_i - r_i) ∈ K`.
#[derive(Debug, Clone, PartialEq)]
pub struct SharingProblem {
    cone: Cone,
    agents: Vec<AgentData>,
}

impl SharingProblem {
    pub fn new(cone: Cone, agents: Vec<AgentData>) -> Result<Self> {
        cone.validate()?;
        if agents.is_empty() {
            return Err(Error::InvalidArgument("sharing problem needs at least one agent".into()));
        }
        for a in &agents {
            check_dim(cone.dim(), a.coupling.nrows())?;
        }
        Ok(Self { cone, agents })
    }

    pub fn cone(&self) -> &Cone {
        &self.cone
    }

    pub fn agents(&self) -> &[AgentData] {
        &self.agents
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    /// Coupling dimension `m`.
    pub fn coupling_dim(&self) -> usize {
        self.cone.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.agents.iter().map(AgentData::dim).sum()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.agents.iter().map(AgentData::dim).collect()
    }

    pub fn check_primal(&self, xi: &[DVector<f64>]) -> Result<()> {
        check_dim(self.agents.len(), xi.len())?;
        for (a, x) in self.agents.iter().zip(xi) {
            check_dim(a.dim(), x.len())?;
        }
        Ok(())
    }

    pub fn objective(&self, xi: &[DVector<f64>]) -> f64 {
        self.agents.iter().zip(xi).map(|(a, x)| a.objective(x)).sum()
    }

    /// Objective with indicator terms dropped.
    pub fn objective_finite(&self, xi: &[DVector<f64>]) -> f64 {
        self.agents
            .iter()
            .zip(xi)
            .map(|(a, x)| a.prox.finite_part(x.as_slice()) + a.smooth.value(x))
            .sum()
    }

    /// `Σ_i (R_i ξ_i - r_i)`.
    pub fn constraint_image(&self, xi: &[DVector<f64>]) -> DVector<f64> {
        let mut g = DVector::zeros(self.coupling_dim());
        for (a, x) in self.agents.iter().zip(xi) {
            g.gemv(1.0, &a.coupling, x, 1.0);
            g -= &a.offset;
        }
        g
    }

    /// `Σ_i r_i`.
    pub fn total_offset(&self) -> DVector<f64> {
        self.agents.iter().fold(DVector::zeros(self.coupling_dim()), |acc, a| acc + &a.offset)
    }

    /// `[R_1 … R_N]`.
    pub fn stacked_coupling(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(self.coupling_dim(), self.total_dim());
        let mut col = 0;
        for a in &self.agents {
            t.columns_mut(col, a.dim()).copy_from(&a.coupling);
            col += a.dim();
        }
        t
    }

    /// Largest Lipschitz constant over agents.
    pub fn max_lipschitz(&self) -> f64 {
        self.agents.iter().map(|a| a.lipschitz).fold(0.0, f64::max)
    }

    /// Splits a stacked primal vector into agent blocks.
    pub fn split(&self, x: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        check_dim(self.total_dim(), x.len())?;
        let mut out = Vec::with_capacity(self.agents.len());
        let mut off = 0;
        for a in &self.agents {
            out.push(x.rows(off, a.dim()).into_owned());
            off += a.dim();
        }
        Ok(out)
    }

    pub fn stack(&self, xi: &[DVector<f64>]) -> DVector<f64> {
        DVector::from_iterator(self.total_dim(), xi.iter().flat_map(|x| x.iter().copied()))
    }
}

/// Optimal primal blocks, a dual multiplier `y* ∈ K°` and the optimal value.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub primal: Vec<DVector<f64>>,
    pub dual: DVector<f64>,
    pub objective: f64,
}
