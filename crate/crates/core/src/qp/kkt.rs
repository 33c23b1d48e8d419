use serde::Serialize;

use super::{inf_norm, QpProblem};

/// KKT residuals in the problem's own units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct KktResiduals {
    /// Largest equality or bound violation.
    pub primal: f64,
    /// Largest stationarity error or multiplier sign error.
    pub dual: f64,
    /// Largest `|y_i| * slack_i` over inequality rows.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.complementarity)
    }
}

/// Evaluates the KKT conditions of `prob` at `(z, y_eq, y_in)` from scratch.
pub fn kkt_residuals(prob: &QpProblem, z: &[f64], y_eq: &[f64], y_in: &[f64]) -> KktResiduals {
    let ez = prob.aeq.mul(z);
    let iz = prob.ain.mul(z);
    let mut primal = 0.0f64;
    for (v, b) in ez.iter().zip(&prob.beq) {
        primal = primal.max((v - b).abs());
    }
    let mut sign = 0.0f64;
    let mut compl = 0.0f64;
    for i in 0..iz.len() {
        let (l, u, v, y) = (prob.lo[i], prob.hi[i], iz[i], y_in[i]);
        primal = primal.max(l - v).max(v - u);
        if y > 0.0 {
            if u.is_finite() {
                compl = compl.max(y * (u - v).abs());
            } else {
                sign = sign.max(y);
            }
        } else if y < 0.0 {
            if l.is_finite() {
                compl = compl.max(-y * (v - l).abs());
            } else {
                sign = sign.max(-y);
            }
        }
    }
    let mut grad = prob.h.mul(z);
    for (gi, qi) in grad.iter_mut().zip(&prob.g) {
        *gi += qi;
    }
    prob.aeq.tr_mul_add(1.0, y_eq, &mut grad);
    prob.ain.tr_mul_add(1.0, y_in, &mut grad);
    KktResiduals { primal: primal.max(0.0), dual: inf_norm(&grad).max(sign), complementarity: compl }
}
