//! Convex quadratic programs and an operator-splitting solver for them.
//!
//! Problems have the form
//!
//! ```text
//! minimize    ½ zᵀ H z + gᵀ z
//! subject to  Aeq z = beq,   lo ≤ Ain z ≤ hi
//! ```

mod admm;
mod kkt;
pub mod ldl;
mod oracle;
mod polish;
pub mod sparse;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

pub use admm::solve;
pub use kkt::{kkt_residuals, KktResiduals};
pub use oracle::{brute_force_oracle, OracleLimits};
pub use sparse::CscMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: CscMatrix,
    pub g: Vec<f64>,
    pub aeq: CscMatrix,
    pub beq: Vec<f64>,
    pub ain: CscMatrix,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl QpProblem {
    pub fn new(h: CscMatrix, g: Vec<f64>, aeq: CscMatrix, beq: Vec<f64>, ain: CscMatrix, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let d = g.len();
        let bad = |m: String| Err(Error::Dimension(m));
        if h.nrows != d || h.ncols != d {
            return bad(format!("H is {}x{} for {d} variables", h.nrows, h.ncols));
        }
        if aeq.ncols != d || aeq.nrows != beq.len() {
            return bad(format!("Aeq is {}x{} with {} right-hand sides", aeq.nrows, aeq.ncols, beq.len()));
        }
        if ain.ncols != d || ain.nrows != lo.len() || ain.nrows != hi.len() {
            return bad(format!("Ain is {}x{} with bounds {}/{}", ain.nrows, ain.ncols, lo.len(), hi.len()));
        }
        if !h.is_symmetric(1e-10 * (1.0 + h.values.iter().fold(0.0f64, |a, v| a.max(v.abs())))) {
            return Err(Error::Domain("H must be symmetric".into()));
        }
        if g.iter().chain(&beq).any(|v| !v.is_finite()) || h.values.iter().chain(&aeq.values).chain(&ain.values).any(|v| !v.is_finite()) {
            return Err(Error::Domain("QP data must be finite".into()));
        }
        if lo.iter().zip(&hi).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::Domain("inequality bounds need lo <= hi".into()));
        }
        Ok(Self { h, g, aeq, beq, ain, lo, hi })
    }

    /// Convenience constructor from dense blocks.
    pub fn dense(
        h: &DMatrix<f64>,
        g: &DVector<f64>,
        aeq: &DMatrix<f64>,
        beq: &DVector<f64>,
        ain: &DMatrix<f64>,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
    ) -> Result<Self> {
        let d = g.len();
        let shape = |m: &DMatrix<f64>| if m.nrows() == 0 { DMatrix::zeros(0, d) } else { m.clone() };
        Self::new(
            CscMatrix::from_dense(h),
            g.as_slice().to_vec(),
            CscMatrix::from_dense(&shape(aeq)),
            beq.as_slice().to_vec(),
            CscMatrix::from_dense(&shape(ain)),
            lo.as_slice().to_vec(),
            hi.as_slice().to_vec(),
        )
    }

    pub fn n_vars(&self) -> usize {
        self.g.len()
    }

    pub fn n_eq(&self) -> usize {
        self.beq.len()
    }

    pub fn n_in(&self) -> usize {
        self.lo.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let hz = self.h.mul(z);
        0.5 * dot(z, &hz) + dot(&self.g, z)
    }

    /// Stacked constraint matrix `[Aeq; Ain]` with bounds `[beq; lo]`, `[beq; hi]`.
    pub(crate) fn stacked(&self) -> (CscMatrix, Vec<f64>, Vec<f64>) {
        let c = CscMatrix::vstack(&self.aeq, &self.ain);
        let mut l = self.beq.clone();
        l.extend_from_slice(&self.lo);
        let mut u = self.beq.clone();
        u.extend_from_slice(&self.hi);
        (c, l, u)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub eps_prim: f64,
    pub eps_dual: f64,
    /// Tolerance of the infeasibility certificates.
    pub eps_infeas: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha_relax: f64,
    pub adaptive_rho: bool,
    pub adapt_interval: usize,
    pub scaling_iters: usize,
    pub polish: bool,
    pub warm_start: Option<(Vec<f64>, Vec<f64>)>,
    /// Appends one line per iteration to this CSV file.
    pub trace_csv: Option<std::path::PathBuf>,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_prim: 1e-8,
            eps_dual: 1e-8,
            eps_infeas: 1e-7,
            max_iter: 50_000,
            rho: 0.1,
            sigma: 1e-6,
            alpha_relax: 1.6,
            adaptive_rho: true,
            adapt_interval: 25,
            scaling_iters: 0,
            polish: true,
            warm_start: None,
            trace_csv: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    InfeasibleDetected,
    DualInfeasibleDetected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: Vec<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality rows: positive at the upper bound, negative at the lower.
    pub y_in: Vec<f64>,
    pub status: QpStatus,
    pub residuals: KktResiduals,
    pub objective: f64,
    pub iterations: usize,
    pub polished: bool,
    /// Primal infeasibility certificate over `[eq; in]` rows, when detected.
    pub certificate: Option<Vec<f64>>,
}
