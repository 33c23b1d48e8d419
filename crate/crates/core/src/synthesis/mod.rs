//! Constrained-LQR synthesis of blended FIR closed-loop maps.
//!
//! The program minimizes the projected-moment LQR cost over all zone maps
//! subject to per-zone FIR feasibility, the summed peak-gain safety bounds and
//! optional support masks. The ∞-norm bounds are encoded exactly with
//! entrywise slacks and per-zone row-sum bounds.

mod locality;

use nalgebra::DMatrix;
use serde::Serialize;

pub use locality::{build_locality_mask, chain_adjacency, hop_distances, LocalityMask, LocalityParams};

use crate::clm::{peak_gain, BlendClm, Closure, FirClm, LinearSystem};
use crate::error::{ConstraintFamily, Error, Result};
use crate::linalg::{is_symmetric, min_sym_eigenvalue, sym_sqrt};
use crate::moments::{alpha_moments, build_sigma_w, AlphaMoments, DisturbanceModel};
use crate::projection::{check_radii, ProjectionKind};
use crate::qp::{self, CscMatrix, KktResiduals, QpProblem, QpSettings, QpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct SafetySpec {
    pub x_max: f64,
    pub u_max: f64,
    pub eta_max: f64,
}

impl SafetySpec {
    /// `x_max` and `u_max` may be infinite to drop a bound.
    pub fn new(x_max: f64, u_max: f64, eta_max: f64) -> Result<Self> {
        if !(x_max > 0.0 && u_max > 0.0 && eta_max > 0.0 && eta_max.is_finite()) {
            return Err(Error::Domain(format!("safety bounds must be positive, got x_max={x_max}, u_max={u_max}, eta_max={eta_max}")));
        }
        Ok(Self { x_max, u_max, eta_max })
    }

    pub fn unconstrained(eta_max: f64) -> Self {
        Self { x_max: f64::INFINITY, u_max: f64::INFINITY, eta_max }
    }
}

/// `sum_k R^(zone)_k[:, j] = 0` for every listed column `j`: the zone rejects
/// constant disturbances entering those coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct IntegralConstraint {
    pub zone: usize,
    pub columns: Vec<usize>,
}

/// Everything except the zone radii.
#[derive(Debug, Clone)]
pub struct SynthesisSetup {
    pub sys: LinearSystem,
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub horizon: usize,
    pub dist: DisturbanceModel,
    pub safety: SafetySpec,
    pub mask: Option<LocalityMask>,
    pub closure: Closure,
    pub integral: Vec<IntegralConstraint>,
    pub qp: QpSettings,
    /// Entrywise tolerance used to validate the result.
    pub feas_tol: f64,
}

impl SynthesisSetup {
    pub fn new(sys: LinearSystem, q: DMatrix<f64>, p: DMatrix<f64>, horizon: usize, dist: DisturbanceModel, safety: SafetySpec) -> Self {
        Self {
            sys,
            q,
            p,
            horizon,
            dist,
            safety,
            mask: None,
            closure: Closure::General,
            integral: Vec::new(),
            qp: QpSettings::default(),
            feas_tol: 1e-8,
        }
    }

    fn check(&self, radii: &[f64]) -> Result<()> {
        let (n, m) = (self.sys.n(), self.sys.m());
        for (name, w, d) in [("Q", &self.q, n), ("P", &self.p, m)] {
            if w.nrows() != d || w.ncols() != d {
                return Err(Error::Dimension(format!("{name} must be {d}x{d}")));
            }
            if !is_symmetric(w, 1e-12 * (1.0 + w.amax())) || min_sym_eigenvalue(w) <= 0.0 {
                return Err(Error::Domain(format!("{name} must be symmetric positive definite")));
            }
        }
        if self.horizon < 2 {
            return Err(Error::Domain("FIR horizon must be at least 2".into()));
        }
        check_radii(radii)?;
        let top = *radii.last().unwrap();
        let eta = self.safety.eta_max;
        if (top - eta).abs() > 1e-12 * eta.max(1.0) || (self.dist.eta_max() - eta).abs() > 1e-12 * eta.max(1.0) {
            return Err(Error::Domain(format!(
                "the outer radius ({top}) and the disturbance support ({}) must equal eta_max ({eta})",
                self.dist.eta_max()
            )));
        }
        if let Some(mask) = &self.mask {
            mask.check_shape(n, m, self.horizon)?;
        }
        for c in &self.integral {
            if c.zone >= radii.len() || c.columns.iter().any(|&j| j >= n) {
                return Err(Error::Domain("integral constraint refers to a missing zone or column".into()));
            }
        }
        Ok(())
    }
}

/// Where each CLM entry lives in the decision vector.
#[derive(Debug, Clone)]
pub struct SynthesisLayout {
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    pub zones: usize,
    /// `r_var[zone][k-1][i * n + j]`.
    pub r_var: Vec<Vec<Vec<Option<usize>>>>,
    /// `m_var[zone][k-1][a * n + j]`.
    pub m_var: Vec<Vec<Vec<Option<usize>>>>,
    pub n_vars: usize,
    pub eq_family: Vec<ConstraintFamily>,
    pub in_family: Vec<ConstraintFamily>,
}

impl SynthesisLayout {
    pub fn extract(&self, z: &[f64]) -> Result<Vec<FirClm>> {
        (0..self.zones)
            .map(|zi| {
                let get = |v: &Vec<Option<usize>>, rows: usize| {
                    DMatrix::from_fn(rows, self.n, |i, j| v[i * self.n + j].map_or(0.0, |idx| z[idx]))
                };
                let r = self.r_var[zi].iter().map(|v| get(v, self.n)).collect();
                let m = self.m_var[zi].iter().map(|v| get(v, self.m)).collect();
                FirClm::new(r, m)
            })
            .collect()
    }
}

#[derive(Default)]
struct Builder {
    n_vars: usize,
    h: Vec<(usize, usize, f64)>,
    eq: Vec<(usize, usize, f64)>,
    beq: Vec<f64>,
    eq_family: Vec<ConstraintFamily>,
    ain: Vec<(usize, usize, f64)>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    in_family: Vec<ConstraintFamily>,
}

impl Builder {
    fn var(&mut self) -> usize {
        self.n_vars += 1;
        self.n_vars - 1
    }

    fn eq_row(&mut self, terms: &[(usize, f64)], rhs: f64, fam: ConstraintFamily) {
        let row = self.beq.len();
        self.eq.extend(terms.iter().map(|&(v, c)| (row, v, c)));
        self.beq.push(rhs);
        self.eq_family.push(fam);
    }

    fn in_row(&mut self, terms: &[(usize, f64)], lo: f64, hi: f64, fam: ConstraintFamily) {
        let row = self.lo.len();
        self.ain.extend(terms.iter().map(|&(v, c)| (row, v, c)));
        self.lo.push(lo);
        self.hi.push(hi);
        self.in_family.push(fam);
    }
}

/// Which safety families to include; the diagnosis of infeasibility drops them one at a time.
#[derive(Clone, Copy)]
struct Families {
    state: bool,
    input: bool,
}

/// Builds the vectorized synthesis QP for the given radii.
pub fn build_synthesis_qp(setup: &SynthesisSetup, radii: &[f64]) -> Result<(QpProblem, SynthesisLayout, AlphaMoments)> {
    setup.check(radii)?;
    let alpha = alpha_moments(&setup.dist, radii)?;
    let (prob, layout) = assemble(setup, radii, &alpha, Families { state: true, input: true })?;
    Ok((prob, layout, alpha))
}

fn assemble(setup: &SynthesisSetup, radii: &[f64], alpha: &AlphaMoments, fam: Families) -> Result<(QpProblem, SynthesisLayout)> {
    use ConstraintFamily as F;
    let (n, m, t_h, nz) = (setup.sys.n(), setup.sys.m(), setup.horizon, radii.len());
    let (a, bm) = (setup.sys.a(), setup.sys.b());
    let full = LocalityMask::full(n, m, t_h);
    let mask = setup.mask.as_ref().unwrap_or(&full);
    let mut b = Builder::default();

    let mut r_var = vec![vec![vec![None; n * n]; t_h]; nz];
    let mut m_var = vec![vec![vec![None; m * n]; t_h]; nz];
    for zi in 0..nz {
        for k in 0..t_h {
            for i in 0..n {
                for j in 0..n {
                    if mask.sx[k][(i, j)] {
                        r_var[zi][k][i * n + j] = Some(b.var());
                    }
                }
            }
            for ai in 0..m {
                for j in 0..n {
                    if mask.su[k][(ai, j)] {
                        m_var[zi][k][ai * n + j] = Some(b.var());
                    }
                }
            }
        }
    }

    // Cost: sum_k sum_{zi,zj} alpha_{zi,zj} [tr(R_k^(zi)' Q R_k^(zj)) + tr(M_k^(zi)' P M_k^(zj))].
    let add_cost = |b: &mut Builder, vars: &Vec<Vec<Vec<Option<usize>>>>, w: &DMatrix<f64>, rows: usize| {
        for zi in 0..nz {
            for zj in 0..nz {
                let al = alpha.get(zi, zj);
                if al == 0.0 {
                    continue;
                }
                for k in 0..t_h {
                    for c in 0..n {
                        for r1 in 0..rows {
                            let Some(v1) = vars[zi][k][r1 * n + c] else { continue };
                            for r2 in 0..rows {
                                let Some(v2) = vars[zj][k][r2 * n + c] else { continue };
                                let q = w[(r1, r2)];
                                if q != 0.0 {
                                    b.h.push((v1, v2, 2.0 * al * q));
                                }
                            }
                        }
                    }
                }
            }
        }
    };
    add_cost(&mut b, &r_var, &setup.q, n);
    add_cost(&mut b, &m_var, &setup.p, m);

    for zi in 0..nz {
        let rv = &r_var[zi];
        let mv = &m_var[zi];
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = rv[0][i * n + j] {
                    b.eq_row(&[(v, 1.0)], if i == j { 1.0 } else { 0.0 }, F::FirClosure);
                }
            }
        }
        // A R_k + B M_k, entry (i, j), as a list of terms.
        let propagate = |k: usize, i: usize, j: usize, sign: f64| -> Vec<(usize, f64)> {
            let mut terms = Vec::new();
            for l in 0..n {
                if a[(i, l)] != 0.0 {
                    if let Some(v) = rv[k][l * n + j] {
                        terms.push((v, sign * a[(i, l)]));
                    }
                }
            }
            for ai in 0..m {
                if bm[(i, ai)] != 0.0 {
                    if let Some(v) = mv[k][ai * n + j] {
                        terms.push((v, sign * bm[(i, ai)]));
                    }
                }
            }
            terms
        };
        for k in 0..t_h - 1 {
            for i in 0..n {
                for j in 0..n {
                    let mut terms = propagate(k, i, j, -1.0);
                    let family = match rv[k + 1][i * n + j] {
                        Some(v) => {
                            terms.push((v, 1.0));
                            F::FirClosure
                        }
                        None => F::Mask,
                    };
                    if !terms.is_empty() {
                        b.eq_row(&terms, 0.0, family);
                    }
                }
            }
        }
        match setup.closure {
            Closure::General => {
                for i in 0..n {
                    for j in 0..n {
                        let terms = propagate(t_h - 1, i, j, 1.0);
                        if !terms.is_empty() {
                            b.eq_row(&terms, 0.0, F::FirClosure);
                        }
                    }
                }
            }
            Closure::Strict => {
                for v in rv[t_h - 1].iter().chain(&mv[t_h - 1]).flatten() {
                    b.eq_row(&[(*v, 1.0)], 0.0, F::FirClosure);
                }
            }
        }
        for c in setup.integral.iter().filter(|c| c.zone == zi) {
            for &j in &c.columns {
                for i in 0..n {
                    let terms: Vec<(usize, f64)> = (0..t_h).filter_map(|k| rv[k][i * n + j]).map(|v| (v, 1.0)).collect();
                    if !terms.is_empty() {
                        b.eq_row(&terms, 0.0, F::Integral);
                    }
                }
            }
        }
    }

    // Safety: sum_i (eta_i - eta_{i-1}) * |X^(i)| <= bound through entrywise and row-sum slacks.
    let widths: Vec<f64> = radii.iter().enumerate().map(|(i, &r)| r - if i == 0 { 0.0 } else { radii[i - 1] }).collect();
    let add_safety = |b: &mut Builder, vars: &Vec<Vec<Vec<Option<usize>>>>, rows: usize, bound: f64, family: F| {
        let mut budget = Vec::new();
        for zi in 0..nz {
            if widths[zi] <= 0.0 {
                continue;
            }
            let s = b.var();
            budget.push((s, widths[zi]));
            for r in 0..rows {
                let mut row_terms = vec![(s, -1.0)];
                for k in 0..t_h {
                    for c in 0..n {
                        if let Some(v) = vars[zi][k][r * n + c] {
                            let t = b.var();
                            b.in_row(&[(v, 1.0), (t, -1.0)], f64::NEG_INFINITY, 0.0, family);
                            b.in_row(&[(v, 1.0), (t, 1.0)], 0.0, f64::INFINITY, family);
                            row_terms.push((t, 1.0));
                        }
                    }
                }
                b.in_row(&row_terms, f64::NEG_INFINITY, 0.0, family);
            }
        }
        if !budget.is_empty() {
            b.in_row(&budget, f64::NEG_INFINITY, bound, family);
        }
    };
    if fam.state && setup.safety.x_max.is_finite() {
        add_safety(&mut b, &r_var, n, setup.safety.x_max, F::StateSafety);
    }
    if fam.input && setup.safety.u_max.is_finite() {
        add_safety(&mut b, &m_var, m, setup.safety.u_max, F::InputSafety);
    }

    let d = b.n_vars;
    let prob = QpProblem::new(
        CscMatrix::from_triplets(d, d, &b.h),
        vec![0.0; d],
        CscMatrix::from_triplets(b.beq.len(), d, &b.eq),
        b.beq,
        CscMatrix::from_triplets(b.lo.len(), d, &b.ain),
        b.lo,
        b.hi,
    )?;
    let layout = SynthesisLayout { n, m, horizon: t_h, zones: nz, r_var, m_var, n_vars: d, eq_family: b.eq_family, in_family: b.in_family };
    Ok((prob, layout))
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    pub residuals: KktResiduals,
    pub n_vars: usize,
    pub n_eq: usize,
    pub n_in: usize,
}

/// Certified peaks of the result and whether each safety bound binds.
#[derive(Debug, Clone, Serialize)]
pub struct ActiveReport {
    pub state_peak: f64,
    pub input_peak: f64,
    pub state_bound_active: bool,
    pub input_bound_active: bool,
}

#[derive(Debug, Clone)]
pub struct SynthesisResult {
    pub blend: BlendClm,
    pub objective: f64,
    pub alpha: AlphaMoments,
    pub solver: SolverSummary,
    pub active: ActiveReport,
    pub max_feasibility_residual: f64,
}

pub fn synthesize_blend(setup: &SynthesisSetup, radii: &[f64], projection: ProjectionKind) -> Result<SynthesisResult> {
    let (prob, layout, alpha) = build_synthesis_qp(setup, radii)?;
    let sol = qp::solve(&prob, &setup.qp)?;
    match sol.status {
        QpStatus::Optimal => {}
        QpStatus::MaxIter => {
            return Err(Error::MaxIter { iterations: sol.iterations, prim_res: sol.residuals.primal, dual_res: sol.residuals.dual })
        }
        QpStatus::InfeasibleDetected => return Err(diagnose(setup, radii, &alpha, &prob, &layout, &sol.z)),
        QpStatus::DualInfeasibleDetected => return Err(Error::Numerical("synthesis QP reported unbounded cost".into())),
    }
    let zones = layout.extract(&sol.z)?;
    let blend = BlendClm::new(zones, radii.to_vec(), projection)?;
    let reports = blend.validate(&setup.sys, setup.feas_tol, setup.closure)?;
    let worst = reports.iter().map(|r| r.max_residual()).fold(0.0, f64::max);
    if worst > setup.feas_tol {
        return Err(Error::Unvalidated(worst));
    }
    if let Some(mask) = &setup.mask {
        for z in blend.zones() {
            mask.check_compliance(z)?;
        }
    }
    let (state_peak, input_peak) = worst_case_peak(&blend);
    let act_tol = 1e-6;
    let active = ActiveReport {
        state_peak,
        input_peak,
        state_bound_active: state_peak >= setup.safety.x_max * (1.0 - act_tol),
        input_bound_active: input_peak >= setup.safety.u_max * (1.0 - act_tol),
    };
    Ok(SynthesisResult {
        objective: sol.objective,
        solver: SolverSummary {
            status: sol.status,
            iterations: sol.iterations,
            polished: sol.polished,
            residuals: sol.residuals,
            n_vars: prob.n_vars(),
            n_eq: prob.n_eq(),
            n_in: prob.n_in(),
        },
        blend,
        alpha,
        active,
        max_feasibility_residual: worst,
    })
}

/// The linear baseline: a single zone covering the whole disturbance range.
pub fn synthesize_linear(setup: &SynthesisSetup) -> Result<SynthesisResult> {
    synthesize_blend(setup, &[setup.safety.eta_max], ProjectionKind::Saturation)
}

/// Names the constraint family responsible for infeasibility by re-solving with
/// each safety family removed.
fn diagnose(setup: &SynthesisSetup, radii: &[f64], alpha: &AlphaMoments, prob: &QpProblem, layout: &SynthesisLayout, z: &[f64]) -> Error {
    let violations = family_violations(prob, layout, z);
    let viol = |f: ConstraintFamily| violations.iter().find(|(g, _)| *g == f).map_or(0.0, |(_, v)| *v);
    let feasible_without = |fam: Families| -> bool {
        let Ok((p, _)) = assemble(setup, radii, alpha, fam) else { return false };
        let mut opts = setup.qp.clone();
        opts.polish = false;
        opts.eps_prim = 1e-6;
        opts.eps_dual = 1e-6;
        matches!(qp::solve(&p, &opts).map(|s| s.status), Ok(QpStatus::Optimal))
    };
    let drop_state = feasible_without(Families { state: false, input: true });
    let drop_input = feasible_without(Families { state: true, input: false });
    let family = match (drop_state, drop_input) {
        (true, false) => ConstraintFamily::StateSafety,
        (false, true) => ConstraintFamily::InputSafety,
        (true, true) => {
            if viol(ConstraintFamily::StateSafety) >= viol(ConstraintFamily::InputSafety) {
                ConstraintFamily::StateSafety
            } else {
                ConstraintFamily::InputSafety
            }
        }
        (false, false) => {
            if feasible_without(Families { state: false, input: false }) {
                if viol(ConstraintFamily::StateSafety) >= viol(ConstraintFamily::InputSafety) {
                    ConstraintFamily::StateSafety
                } else {
                    ConstraintFamily::InputSafety
                }
            } else {
                [ConstraintFamily::Mask, ConstraintFamily::Integral, ConstraintFamily::FirClosure]
                    .into_iter()
                    .max_by(|a, b| viol(*a).partial_cmp(&viol(*b)).unwrap())
                    .unwrap()
            }
        }
    };
    Error::Infeasible { family, violation: viol(family) }
}

/// Largest constraint violation of each family at `z`.
pub fn family_violations(prob: &QpProblem, layout: &SynthesisLayout, z: &[f64]) -> Vec<(ConstraintFamily, f64)> {
    let mut out: Vec<(ConstraintFamily, f64)> = Vec::new();
    let mut bump = |f: ConstraintFamily, v: f64| match out.iter_mut().find(|(g, _)| *g == f) {
        Some(e) => e.1 = e.1.max(v),
        None => out.push((f, v.max(0.0))),
    };
    let ez = prob.aeq.mul(z);
    for (i, v) in ez.iter().enumerate() {
        bump(layout.eq_family[i], (v - prob.beq[i]).abs());
    }
    let iz = prob.ain.mul(z);
    for (i, v) in iz.iter().enumerate() {
        bump(layout.in_family[i], (prob.lo[i] - v).max(v - prob.hi[i]).max(0.0));
    }
    out
}

/// The objective evaluated in Frobenius form through `Q^{1/2}`, `P^{1/2}` and `Sigma_w^{1/2}`.
pub fn blend_cost(blend: &BlendClm, alpha: &AlphaMoments, q: &DMatrix<f64>, p: &DMatrix<f64>) -> Result<f64> {
    let nz = blend.zones().len();
    if alpha.zones() != nz {
        return Err(Error::Dimension(format!("alpha has {} zones, blend has {nz}", alpha.zones())));
    }
    let (n, m) = (blend.n(), blend.m_dim());
    if q.nrows() != n || q.ncols() != n || p.nrows() != m || p.ncols() != m {
        return Err(Error::Dimension("cost weights do not match the blend".into()));
    }
    let qh = sym_sqrt(q, 1e-12)?;
    let ph = sym_sqrt(p, 1e-12)?;
    let sw = build_sigma_w(alpha, n)?;
    let mut total = 0.0;
    for k in 1..=blend.horizon() {
        let mut xr = DMatrix::zeros(n, nz * n);
        let mut xm = DMatrix::zeros(m, nz * n);
        for (i, z) in blend.zones().iter().enumerate() {
            xr.view_mut((0, i * n), (n, n)).copy_from(z.r(k));
            xm.view_mut((0, i * n), (m, n)).copy_from(z.m(k));
        }
        total += (&qh * xr * &sw.sqrt).norm_squared() + (&ph * xm * &sw.sqrt).norm_squared();
    }
    Ok(total)
}

/// Certified bounds on `sup |x_t|` and `sup |u_t|` over all admissible disturbances.
pub fn worst_case_peak(blend: &BlendClm) -> (f64, f64) {
    let mut prev = 0.0;
    let (mut xs, mut us) = (0.0, 0.0);
    for (z, &eta) in blend.zones().iter().zip(blend.radii()) {
        let w = eta - prev;
        prev = eta;
        xs += w * peak_gain(&z.r_concat());
        us += w * peak_gain(&z.m_concat());
    }
    (xs, us)
}

/// Convenience for a linear map.
pub fn worst_case_peak_linear(clm: &FirClm, eta_max: f64) -> (f64, f64) {
    (eta_max * peak_gain(&clm.r_concat()), eta_max * peak_gain(&clm.m_concat()))
}

pub fn blend_alpha(blend: &BlendClm, dist: &DisturbanceModel) -> Result<AlphaMoments> {
    alpha_moments(dist, blend.radii())
}
