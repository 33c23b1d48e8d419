//! ADMM with over-relaxation, Ruiz equilibration, adaptive penalty and
//! solution polishing, in the style of OSQP.

use std::io::Write;

use super::kkt::kkt_residuals;
use super::ldl::LdlFactor;
use super::polish::polish;
use super::sparse::CscMatrix;
use super::{dot, inf_norm, QpProblem, QpSettings, QpSolution, QpStatus};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_SCALE: f64 = 1e3;
const ADAPT_RATIO: f64 = 5.0;
const CHECK_EVERY: usize = 5;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const POLISH_TRIGGER: f64 = 1e-3;
const POLISH_EVERY: usize = 100;

pub(crate) struct Scaled {
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub c: f64,
}

fn limit(v: f64) -> f64 {
    if v < SCALE_MIN {
        1.0
    } else {
        v.min(SCALE_MAX)
    }
}

fn equilibrate(prob: &QpProblem, iters: usize) -> Scaled {
    let (a, l, u) = prob.stacked();
    let n = prob.n_vars();
    let m = a.nrows;
    let mut s = Scaled { p: prob.h.clone(), q: prob.g.clone(), a, l, u, d: vec![1.0; n], e: vec![1.0; m], c: 1.0 };
    for _ in 0..iters {
        let pc = s.p.col_inf_norms();
        let ac = s.a.col_inf_norms();
        let ar = s.a.row_inf_norms();
        let dt: Vec<f64> = (0..n).map(|j| 1.0 / limit(pc[j].max(ac[j])).sqrt()).collect();
        let et: Vec<f64> = (0..m).map(|i| 1.0 / limit(ar[i]).sqrt()).collect();
        s.p.scale(&dt, &dt);
        s.a.scale(&et, &dt);
        for j in 0..n {
            s.q[j] *= dt[j];
            s.d[j] *= dt[j];
        }
        for i in 0..m {
            s.e[i] *= et[i];
        }
        let pc = s.p.col_inf_norms();
        let mean = if n == 0 { 0.0 } else { pc.iter().sum::<f64>() / n as f64 };
        let ct = 1.0 / limit(mean.max(inf_norm(&s.q)));
        for v in s.p.values.iter_mut() {
            *v *= ct;
        }
        for v in s.q.iter_mut() {
            *v *= ct;
        }
        s.c *= ct;
    }
    for i in 0..m {
        s.l[i] *= s.e[i];
        s.u[i] *= s.e[i];
    }
    s
}

fn rho_vector(base: f64, l: &[f64], u: &[f64]) -> Vec<f64> {
    l.iter()
        .zip(u)
        .map(|(&lo, &hi)| {
            if lo == hi {
                RHO_EQ_SCALE * base
            } else if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
                RHO_MIN
            } else {
                base
            }
        })
        .collect()
}

/// Upper triangle of `[P + sigma I, Aᵀ; A, -diag(1/rho)]` and the positions of the
/// `-1/rho` entries in its value array.
fn assemble_kkt(p: &CscMatrix, a: &CscMatrix, sigma: f64, rho: &[f64]) -> (CscMatrix, Vec<usize>) {
    let n = p.ncols;
    let m = a.nrows;
    let mut trips = Vec::with_capacity(p.nnz() + a.nnz() + n + m);
    for (r, c, v) in p.triplets() {
        if r <= c {
            trips.push((r, c, v));
        }
    }
    for j in 0..n {
        trips.push((j, j, sigma));
    }
    for (r, c, v) in a.triplets() {
        trips.push((c, n + r, v));
    }
    for i in 0..m {
        trips.push((n + i, n + i, -1.0 / rho[i]));
    }
    let k = CscMatrix::from_triplets(n + m, n + m, &trips);
    let diag_pos = (0..m)
        .map(|i| {
            let col = n + i;
            (k.colptr[col]..k.colptr[col + 1]).find(|&p| k.rowind[p] == col).expect("diagonal present")
        })
        .collect();
    (k, diag_pos)
}

struct Residuals {
    prim: f64,
    dual: f64,
}

fn residuals(s: &Scaled, x: &[f64], z: &[f64], y: &[f64], unscaled: bool) -> Residuals {
    let ax = s.a.mul(x);
    let px = s.p.mul(x);
    let aty = s.a.tr_mul(y);
    let n = x.len();
    let m = z.len();
    let (mut prim, mut dual) = (0.0f64, 0.0f64);
    for i in 0..m {
        let k = if unscaled { 1.0 / s.e[i] } else { 1.0 };
        prim = prim.max(((ax[i] - z[i]) * k).abs());
    }
    for j in 0..n {
        let k = if unscaled { 1.0 / (s.d[j] * s.c) } else { 1.0 };
        dual = dual.max(((px[j] + s.q[j] + aty[j]) * k).abs());
    }
    Residuals { prim, dual }
}

fn unscale(s: &Scaled, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let xu = x.iter().zip(&s.d).map(|(v, d)| v * d).collect();
    let yu = y.iter().zip(&s.e).map(|(v, e)| v * e / s.c).collect();
    (xu, yu)
}

fn primal_infeasible(prob: &QpProblem, s: &Scaled, dy: &[f64], eps: f64) -> Option<Vec<f64>> {
    let dyu: Vec<f64> = dy.iter().zip(&s.e).map(|(v, e)| v * e / s.c).collect();
    let norm = inf_norm(&dyu);
    if norm <= 1e-30 {
        return None;
    }
    let (a, l, u) = prob.stacked();
    let mut support = 0.0;
    for i in 0..dyu.len() {
        let v = dyu[i];
        if v > eps * norm {
            if !u[i].is_finite() {
                return None;
            }
            support += u[i] * v;
        } else if v < -eps * norm {
            if !l[i].is_finite() {
                return None;
            }
            support += l[i] * v;
        }
    }
    if support >= -eps * norm {
        return None;
    }
    let aty = a.tr_mul(&dyu);
    if inf_norm(&aty) > eps * norm {
        return None;
    }
    Some(dyu.iter().map(|v| v / norm).collect())
}

fn dual_infeasible(prob: &QpProblem, s: &Scaled, dx: &[f64], eps: f64) -> bool {
    let dxu: Vec<f64> = dx.iter().zip(&s.d).map(|(v, d)| v * d).collect();
    let norm = inf_norm(&dxu);
    if norm <= 1e-30 {
        return false;
    }
    if dot(&prob.g, &dxu) > -eps * norm || inf_norm(&prob.h.mul(&dxu)) > eps * norm {
        return false;
    }
    let (a, l, u) = prob.stacked();
    let adx = a.mul(&dxu);
    adx.iter().enumerate().all(|(i, &v)| (u[i].is_infinite() || v <= eps * norm) && (l[i].is_infinite() || v >= -eps * norm))
}

/// Solves the QP by ADMM. Deterministic for identical inputs and settings.
pub fn solve(prob: &QpProblem, opts: &QpSettings) -> Result<QpSolution> {
    let n = prob.n_vars();
    let n_eq = prob.n_eq();
    let s = equilibrate(prob, opts.scaling_iters);
    let m = s.a.nrows;
    let alpha = opts.alpha_relax;
    let sigma = opts.sigma;
    let mut rho_base = opts.rho;
    let mut rho = rho_vector(rho_base, &s.l, &s.u);
    let (mut kkt, diag_pos) = assemble_kkt(&s.p, &s.a, sigma, &rho);
    let mut factor = LdlFactor::new(&kkt)?;

    let (mut x, mut y) = match &opts.warm_start {
        Some((x0, y0)) if x0.len() == n && y0.len() == m => {
            (x0.iter().zip(&s.d).map(|(v, d)| v / d).collect::<Vec<_>>(), y0.iter().zip(&s.e).map(|(v, e)| v * s.c / e).collect::<Vec<_>>())
        }
        _ => (vec![0.0; n], vec![0.0; m]),
    };
    let mut z: Vec<f64> = s.a.mul(&x).iter().enumerate().map(|(i, v)| v.clamp(s.l[i], s.u[i])).collect();

    let mut trace = match &opts.trace_csv {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            writeln!(f, "iter,prim,dual,rho")?;
            Some(f)
        }
        None => None,
    };

    let mut rhs = vec![0.0; n + m];
    let mut xt = vec![0.0; n];
    let mut zt = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let polish_trigger = POLISH_TRIGGER.max(opts.eps_prim.max(opts.eps_dual));
    let mut last_polish_iter = 0usize;
    let mut iterations = 0;

    let finish = |x: &[f64], y: &[f64], status: QpStatus, iterations: usize, polished: bool, cert: Option<Vec<f64>>| {
        let (xu, yu) = unscale(&s, x, y);
        let y_eq = yu[..n_eq].to_vec();
        let y_in = yu[n_eq..].to_vec();
        let residuals = kkt_residuals(prob, &xu, &y_eq, &y_in);
        QpSolution { objective: prob.objective(&xu), z: xu, y_eq, y_in, status, residuals, iterations, polished, certificate: cert }
    };

    let try_polish = |x: &[f64], z: &[f64], y: &[f64]| -> Option<(Vec<f64>, Vec<f64>)> {
        if !opts.polish {
            return None;
        }
        let (px, py) = polish(&s, x, z, y)?;
        let (xu, yu) = unscale(&s, &px, &py);
        let r = kkt_residuals(prob, &xu, &yu[..n_eq], &yu[n_eq..]);
        let eps = opts.eps_prim.min(opts.eps_dual);
        (r.primal <= opts.eps_prim && r.dual <= opts.eps_dual && r.complementarity <= eps).then_some((px, py))
    };

    for k in 1..=opts.max_iter {
        iterations = k;
        for j in 0..n {
            rhs[j] = sigma * x[j] - s.q[j];
        }
        for i in 0..m {
            rhs[n + i] = z[i] - y[i] / rho[i];
        }
        factor.solve(&mut rhs);
        xt.copy_from_slice(&rhs[..n]);
        for i in 0..m {
            zt[i] = z[i] + (rhs[n + i] - y[i]) / rho[i];
        }
        let x_prev = x.clone();
        let y_prev = y.clone();
        for j in 0..n {
            x[j] = alpha * xt[j] + (1.0 - alpha) * x[j];
        }
        for i in 0..m {
            let zr = alpha * zt[i] + (1.0 - alpha) * z[i];
            let zn = (zr + y[i] / rho[i]).clamp(s.l[i], s.u[i]);
            y[i] += rho[i] * (zr - zn);
            z[i] = zn;
        }

        let adapt_now = opts.adaptive_rho && k % opts.adapt_interval == 0;
        if k % CHECK_EVERY != 0 && !adapt_now && k != opts.max_iter {
            continue;
        }

        let r = residuals(&s, &x, &z, &y, true);
        if let Some(f) = trace.as_mut() {
            writeln!(f, "{k},{:e},{:e},{:e}", r.prim, r.dual, rho_base)?;
        }
        if !(r.prim.is_finite() && r.dual.is_finite()) {
            return Err(Error::Numerical(format!("ADMM iterates became non-finite at iteration {k}")));
        }
        let merit = r.prim.max(r.dual);
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, x.clone(), z.clone(), y.clone()));
        }

        let converged = r.prim <= opts.eps_prim && r.dual <= opts.eps_dual;
        if converged || (merit <= polish_trigger && k >= last_polish_iter + POLISH_EVERY) {
            last_polish_iter = k;
            if let Some((px, py)) = try_polish(&x, &z, &y) {
                return Ok(finish(&px, &py, QpStatus::Optimal, k, true, None));
            }
            if converged {
                return Ok(finish(&x, &y, QpStatus::Optimal, k, false, None));
            }
        }

        let dy: Vec<f64> = y.iter().zip(&y_prev).map(|(a, b)| a - b).collect();
        if let Some(cert) = primal_infeasible(prob, &s, &dy, opts.eps_infeas) {
            return Ok(finish(&x, &y, QpStatus::InfeasibleDetected, k, false, Some(cert)));
        }
        let dx: Vec<f64> = x.iter().zip(&x_prev).map(|(a, b)| a - b).collect();
        if dual_infeasible(prob, &s, &dx, opts.eps_infeas) {
            return Ok(finish(&x, &y, QpStatus::DualInfeasibleDetected, k, false, None));
        }

        if adapt_now {
            let rs = residuals(&s, &x, &z, &y, false);
            let proposed = (rho_base * (rs.prim / rs.dual.max(1e-30)).sqrt()).clamp(RHO_MIN, RHO_MAX);
            if proposed.is_finite() && (proposed > ADAPT_RATIO * rho_base || proposed < rho_base / ADAPT_RATIO) {
                rho_base = proposed;
                rho = rho_vector(rho_base, &s.l, &s.u);
                for (i, &p) in diag_pos.iter().enumerate() {
                    kkt.values[p] = -1.0 / rho[i];
                }
                factor.refactor(&kkt.values)?;
            }
        }
    }

    let (_, bx, bz, by) = best.unwrap_or((f64::INFINITY, x.clone(), z.clone(), y.clone()));
    if let Some((px, py)) = try_polish(&bx, &bz, &by) {
        return Ok(finish(&px, &py, QpStatus::Optimal, iterations, true, None));
    }
    Ok(finish(&bx, &by, QpStatus::MaxIter, iterations, false, None))
}
