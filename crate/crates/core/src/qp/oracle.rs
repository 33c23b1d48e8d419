//! Reference solver for tiny QPs: enumerate every active set and keep the KKT points.

use nalgebra::{DMatrix, DVector};

use super::QpProblem;
use crate::error::{Error, Result};
use crate::linalg::min_sym_eigenvalue;

#[derive(Debug, Clone, Copy)]
pub struct OracleLimits {
    pub max_vars: usize,
    pub max_ineq: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_vars: 32, max_ineq: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub z: Vec<f64>,
    pub y_eq: Vec<f64>,
    pub y_in: Vec<f64>,
    pub objective: f64,
}

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    Lower,
    Upper,
}

pub fn brute_force_oracle(prob: &QpProblem, limits: OracleLimits) -> Result<OracleSolution> {
    let d = prob.n_vars();
    let mi = prob.n_in();
    if d > limits.max_vars || mi > limits.max_ineq {
        return Err(Error::TooLarge(format!(
            "{d} variables and {mi} inequalities exceed the oracle limits ({} / {})",
            limits.max_vars, limits.max_ineq
        )));
    }
    let h = prob.h.to_dense();
    if d > 0 && min_sym_eigenvalue(&h) < -1e-10 {
        return Err(Error::Domain("oracle needs a PSD cost matrix".into()));
    }
    let aeq = prob.aeq.to_dense();
    let ain = prob.ain.to_dense();
    let g = DVector::from_column_slice(&prob.g);
    let scale = 1.0 + h.amax().max(g.amax()).max(aeq.amax()).max(ain.amax());
    let tol = 1e-9 * scale;

    let options: Vec<Vec<Side>> = (0..mi)
        .map(|i| {
            let (l, u) = (prob.lo[i], prob.hi[i]);
            if l == u {
                vec![Side::Upper]
            } else {
                let mut v = vec![Side::Free];
                if l.is_finite() {
                    v.push(Side::Lower);
                }
                if u.is_finite() {
                    v.push(Side::Upper);
                }
                v
            }
        })
        .collect();

    let mut best: Option<OracleSolution> = None;
    let mut choice = vec![0usize; mi];
    loop {
        let sides: Vec<Side> = choice.iter().enumerate().map(|(i, &c)| options[i][c]).collect();
        if let Some(sol) = kkt_candidate(prob, &h, &g, &aeq, &ain, &sides, tol) {
            if best.as_ref().map_or(true, |b| sol.objective < b.objective - tol) {
                best = Some(sol);
            }
        }
        // Odometer increment over the per-row options.
        let mut i = 0;
        loop {
            if i == mi {
                return best.ok_or_else(|| Error::Domain("oracle found no KKT point (infeasible or unbounded)".into()));
            }
            choice[i] += 1;
            if choice[i] < options[i].len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn kkt_candidate(
    prob: &QpProblem,
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    aeq: &DMatrix<f64>,
    ain: &DMatrix<f64>,
    sides: &[Side],
    tol: f64,
) -> Option<OracleSolution> {
    let d = g.len();
    let ne = aeq.nrows();
    let active: Vec<usize> = (0..sides.len()).filter(|&i| sides[i] != Side::Free).collect();
    let k = ne + active.len();
    let mut kkt = DMatrix::zeros(d + k, d + k);
    let mut rhs = DVector::zeros(d + k);
    kkt.view_mut((0, 0), (d, d)).copy_from(h);
    rhs.rows_mut(0, d).copy_from(&(-g));
    for r in 0..ne {
        for j in 0..d {
            kkt[(d + r, j)] = aeq[(r, j)];
            kkt[(j, d + r)] = aeq[(r, j)];
        }
        rhs[d + r] = prob.beq[r];
    }
    for (t, &i) in active.iter().enumerate() {
        let row = d + ne + t;
        for j in 0..d {
            kkt[(row, j)] = ain[(i, j)];
            kkt[(j, row)] = ain[(i, j)];
        }
        rhs[row] = if sides[i] == Side::Lower { prob.lo[i] } else { prob.hi[i] };
    }
    let svd = kkt.clone().svd(true, true);
    let sol = svd.solve(&rhs, 1e-12 * (1.0 + kkt.amax())).ok()?;
    if (&kkt * &sol - &rhs).amax() > tol {
        return None;
    }
    let z = sol.rows(0, d).into_owned();
    let mut y_in = vec![0.0; sides.len()];
    for (t, &i) in active.iter().enumerate() {
        let lam = sol[d + ne + t];
        match sides[i] {
            Side::Upper if prob.lo[i] != prob.hi[i] && lam < -tol => return None,
            Side::Lower if lam > tol => return None,
            _ => {}
        }
        y_in[i] = lam;
    }
    let iz = ain * &z;
    for i in 0..sides.len() {
        if iz[i] < prob.lo[i] - tol || iz[i] > prob.hi[i] + tol {
            return None;
        }
    }
    let ez = aeq * &z;
    if (0..ne).any(|r| (ez[r] - prob.beq[r]).abs() > tol) {
        return None;
    }
    let zv = z.as_slice().to_vec();
    Some(OracleSolution { objective: prob.objective(&zv), z: zv, y_eq: sol.rows(d, ne).iter().cloned().collect(), y_in })
}
