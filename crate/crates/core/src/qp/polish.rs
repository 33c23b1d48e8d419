//! Active-set polishing: guess the active constraints from the ADMM iterate,
//! solve the reduced equality-constrained KKT system with iterative refinement,
//! and correct the guess a few times by dropping rows whose multipliers have the
//! wrong sign and adding rows that the reduced solution violates.

use super::admm::Scaled;
use super::inf_norm;
use super::ldl::LdlFactor;
use super::sparse::CscMatrix;

const DELTA: f64 = 1e-6;
const REFINE_ITERS: usize = 40;
const MAX_SWEEPS: usize = 12;
const SIGN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Eq,
    Lower,
    Upper,
}

pub(crate) fn polish(s: &Scaled, x: &[f64], z: &[f64], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = z.len();
    let mut active: Vec<Option<Side>> = (0..m)
        .map(|i| {
            if s.l[i] == s.u[i] {
                Some(Side::Eq)
            } else if z[i] - s.l[i] < -y[i] {
                Some(Side::Lower)
            } else if s.u[i] - z[i] < y[i] {
                Some(Side::Upper)
            } else {
                None
            }
        })
        .collect();
    let mut out = None;
    for _ in 0..MAX_SWEEPS {
        let (xs, yfull) = reduced_solve(s, x, y, &active)?;
        let ax = s.a.mul(&xs);
        let scale = 1.0 + inf_norm(&yfull);
        let feas_tol = 1e-12 * (1.0 + inf_norm(&ax));
        let mut changed = false;
        for i in 0..m {
            match active[i] {
                Some(Side::Lower) if yfull[i] > SIGN_TOL * scale => {
                    active[i] = None;
                    changed = true;
                }
                Some(Side::Upper) if yfull[i] < -SIGN_TOL * scale => {
                    active[i] = None;
                    changed = true;
                }
                None if ax[i] < s.l[i] - feas_tol => {
                    active[i] = Some(Side::Lower);
                    changed = true;
                }
                None if ax[i] > s.u[i] + feas_tol => {
                    active[i] = Some(Side::Upper);
                    changed = true;
                }
                _ => {}
            }
        }
        out = Some((xs, yfull));
        if !changed {
            break;
        }
    }
    out
}

fn reduced_solve(s: &Scaled, x: &[f64], y: &[f64], active: &[Option<Side>]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let m = active.len();
    let mut rows = Vec::new();
    let mut b = Vec::new();
    for i in 0..m {
        match active[i] {
            Some(Side::Eq) | Some(Side::Upper) => {
                rows.push(i);
                b.push(s.u[i]);
            }
            Some(Side::Lower) => {
                rows.push(i);
                b.push(s.l[i]);
            }
            None => {}
        }
    }
    let k = rows.len();
    let ared = s.a.select_rows(&rows);

    let mut trips = Vec::with_capacity(s.p.nnz() + ared.nnz() + n + k);
    for (r, c, v) in s.p.triplets() {
        if r <= c {
            trips.push((r, c, v));
        }
    }
    for j in 0..n {
        trips.push((j, j, DELTA));
    }
    for (r, c, v) in ared.triplets() {
        trips.push((c, n + r, v));
    }
    for i in 0..k {
        trips.push((n + i, n + i, -DELTA));
    }
    let kreg = CscMatrix::from_triplets(n + k, n + k, &trips);
    let factor = LdlFactor::new(&kreg).ok()?;

    // Proximal right-hand side keeps directions the reduced system leaves free near the ADMM iterate.
    let mut sol = vec![0.0; n + k];
    for j in 0..n {
        sol[j] = -s.q[j] + DELTA * x[j];
    }
    for (t, &i) in rows.iter().enumerate() {
        sol[n + t] = b[t] - DELTA * y[i];
    }
    factor.solve(&mut sol);

    let mut prev = f64::INFINITY;
    for _ in 0..REFINE_ITERS {
        let (xs, ys) = sol.split_at(n);
        let mut r = vec![0.0; n + k];
        let px = s.p.mul(xs);
        let aty = ared.tr_mul(ys);
        for j in 0..n {
            r[j] = -s.q[j] - px[j] - aty[j];
        }
        let ax = ared.mul(xs);
        for t in 0..k {
            r[n + t] = b[t] - ax[t];
        }
        let norm = inf_norm(&r);
        if norm < 1e-15 || norm >= prev {
            break;
        }
        prev = norm;
        factor.solve(&mut r);
        for (v, d) in sol.iter_mut().zip(&r) {
            *v += d;
        }
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut yfull = vec![0.0; m];
    for (t, &i) in rows.iter().enumerate() {
        yfull[i] = sol[n + t];
    }
    Some((sol[..n].to_vec(), yfull))
}
