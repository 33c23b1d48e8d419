//! Executable realizations of blended maps: the system-level state machine and
//! its anti-windup augmentation.
//!
//! The state machine keeps the zone pieces of its recent disturbance estimates
//! `ŵ` and computes, at every step,
//!
//! ```text
//! ŵ_t = x_t − Σ_i Σ_{k=2..min(T,t+1)} R^(i)_k d_i(ŵ_{t+1−k})
//! u_t =       Σ_i Σ_{k=1..min(T,t+1)} M^(i)_k d_i(ŵ_{t+1−k})
//! ```
//!
//! The anti-windup variant also subtracts `Σ_{k=2..τ+1} A^{k−1} r(ŵ_{t+1−k})`,
//! where `r(v) = v − P_{η_N}(v)` is the part of an estimate beyond the outer radius.
//! Its estimates then obey `ŵ_t = A^{τ+1} r(ŵ_{t−τ−1}) + w_t`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::clm::BlendClm;
use crate::error::{dim_check, Error, Result};
use crate::linalg::{inf_norm, powers};
use crate::projection::{project_slice, ProjectionKind};

/// A causal feedback law `x_t -> u_t`.
pub trait Controller: Send {
    fn n_state(&self) -> usize;
    fn n_input(&self) -> usize;
    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>>;
    /// Latest disturbance estimate, for controllers that keep one.
    fn estimate(&self) -> Option<&DVector<f64>> {
        None
    }
}

#[derive(Debug, Clone)]
pub struct SlController {
    blend: BlendClm,
    /// Zone pieces of past estimates, most recent first.
    history: VecDeque<Vec<DVector<f64>>>,
    what: Option<DVector<f64>>,
    t: usize,
}

impl SlController {
    pub fn new(blend: BlendClm) -> Self {
        let cap = blend.horizon();
        Self { blend, history: VecDeque::with_capacity(cap + 1), what: None, t: 0 }
    }

    pub fn blend(&self) -> &BlendClm {
        &self.blend
    }

    pub fn time(&self) -> usize {
        self.t
    }

    /// `Σ_i Σ_{k≥2} R^(i)_k d_i(ŵ_{t+1−k})`: the part of `x_t` explained by past estimates.
    pub fn predicted_state(&self) -> DVector<f64> {
        let mut acc = DVector::zeros(self.blend.n());
        for (i, zone) in self.blend.zones().iter().enumerate() {
            for (h, pieces) in self.history.iter().enumerate().take(self.blend.horizon() - 1) {
                acc.gemv(1.0, zone.r(h + 2), &pieces[i], 1.0);
            }
        }
        acc
    }

    /// Records `ŵ_t` and returns `u_t`.
    pub fn commit(&mut self, what: DVector<f64>) -> DVector<f64> {
        self.history.push_front(self.blend.decompose(&what));
        self.history.truncate(self.blend.horizon());
        let mut u = DVector::zeros(self.blend.m_dim());
        for (i, zone) in self.blend.zones().iter().enumerate() {
            for (h, pieces) in self.history.iter().enumerate() {
                u.gemv(1.0, zone.m(h + 1), &pieces[i], 1.0);
            }
        }
        self.what = Some(what);
        self.t += 1;
        u
    }

    pub fn snapshot(&self) -> ControllerSnapshot {
        ControllerSnapshot {
            kind: SnapshotKind::Sl,
            t: self.t,
            history: self.history.iter().map(|p| p.iter().map(|v| v.as_slice().to_vec()).collect()).collect(),
            what: self.what.as_ref().map(|v| v.as_slice().to_vec()),
            residuals: Vec::new(),
        }
    }

    pub fn restore(&mut self, snap: &ControllerSnapshot) -> Result<()> {
        let (n, nz) = (self.blend.n(), self.blend.zones().len());
        let ok = snap.history.len() <= self.blend.horizon()
            && snap.history.iter().all(|p| p.len() == nz && p.iter().all(|v| v.len() == n))
            && snap.what.as_ref().map_or(true, |w| w.len() == n);
        dim_check(ok, || "snapshot does not fit this controller".into())?;
        self.history = snap.history.iter().map(|p| p.iter().map(|v| DVector::from_column_slice(v)).collect()).collect();
        self.what = snap.what.as_ref().map(|w| DVector::from_column_slice(w));
        self.t = snap.t;
        Ok(())
    }
}

fn check_x(x: &DVector<f64>, n: usize) -> Result<()> {
    dim_check(x.len() == n, || format!("state has length {}, expected {n}", x.len()))
}

/// One step of the system-level realization.
pub fn sl_step(ctrl: &mut SlController, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_x(x, ctrl.blend.n())?;
    let what = x - ctrl.predicted_state();
    Ok(ctrl.commit(what))
}

impl Controller for SlController {
    fn n_state(&self) -> usize {
        self.blend.n()
    }

    fn n_input(&self) -> usize {
        self.blend.m_dim()
    }

    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        sl_step(self, x)
    }

    fn estimate(&self) -> Option<&DVector<f64>> {
        self.what.as_ref()
    }
}

#[derive(Debug, Clone)]
pub struct AntiWindupController {
    base: SlController,
    tau: usize,
    /// `A^0 .. A^τ`.
    apow: Vec<DMatrix<f64>>,
    /// `r(ŵ)` of recent estimates, most recent first.
    residuals: VecDeque<DVector<f64>>,
}

impl AntiWindupController {
    pub fn new(blend: BlendClm, a: &DMatrix<f64>, tau: usize) -> Result<Self> {
        dim_check(a.is_square() && a.nrows() == blend.n(), || format!("A must be {0}x{0}", blend.n()))?;
        Ok(Self { base: SlController::new(blend), tau, apow: powers(a, tau), residuals: VecDeque::with_capacity(tau + 2) })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn base(&self) -> &SlController {
        &self.base
    }

    pub fn snapshot(&self) -> ControllerSnapshot {
        let mut s = self.base.snapshot();
        s.kind = SnapshotKind::AntiWindup { tau: self.tau };
        s.residuals = self.residuals.iter().map(|v| v.as_slice().to_vec()).collect();
        s
    }

    pub fn restore(&mut self, snap: &ControllerSnapshot) -> Result<()> {
        if snap.kind != (SnapshotKind::AntiWindup { tau: self.tau }) {
            return Err(Error::Domain("snapshot was taken from a different controller kind".into()));
        }
        let n = self.base.blend.n();
        dim_check(snap.residuals.len() <= self.tau + 1 && snap.residuals.iter().all(|r| r.len() == n), || {
            "snapshot residual buffer does not fit".into()
        })?;
        self.base.restore(snap)?;
        self.residuals = snap.residuals.iter().map(|r| DVector::from_column_slice(r)).collect();
        Ok(())
    }
}

fn outer_residual(blend: &BlendClm, v: &DVector<f64>) -> DVector<f64> {
    let mut p = DVector::zeros(v.len());
    project_slice(blend.projection(), blend.eta_max(), v.as_slice(), p.as_mut_slice());
    v - p
}

/// One step of the anti-windup realization.
pub fn aw_step(ctrl: &mut AntiWindupController, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_x(x, ctrl.base.blend.n())?;
    let mut what = x - ctrl.base.predicted_state();
    for (h, r) in ctrl.residuals.iter().enumerate().take(ctrl.tau) {
        if r.iter().any(|v| *v != 0.0) {
            what.gemv(-1.0, &ctrl.apow[h + 1], r, 1.0);
        }
    }
    let r = outer_residual(&ctrl.base.blend, &what);
    ctrl.residuals.push_front(r);
    ctrl.residuals.truncate(ctrl.tau + 1);
    Ok(ctrl.base.commit(what))
}

impl Controller for AntiWindupController {
    fn n_state(&self) -> usize {
        self.base.n_state()
    }

    fn n_input(&self) -> usize {
        self.base.n_input()
    }

    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        aw_step(self, x)
    }

    fn estimate(&self) -> Option<&DVector<f64>> {
        self.base.estimate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SnapshotKind {
    Sl,
    AntiWindup { tau: usize },
}

/// Serializable controller state for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSnapshot {
    #[serde(flatten)]
    pub kind: SnapshotKind,
    pub t: usize,
    pub history: Vec<Vec<Vec<f64>>>,
    pub what: Option<Vec<f64>>,
    pub residuals: Vec<Vec<f64>>,
}

impl ControllerSnapshot {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Smallest `τ <= tau_max` with `|A^{τ+1}|_∞ < 1`, with the achieved norm.
pub fn min_tau(a: &DMatrix<f64>, tau_max: usize) -> Result<(usize, f64)> {
    if !a.is_square() {
        return Err(Error::Dimension("A must be square".into()));
    }
    let mut p = a.clone();
    for tau in 0..=tau_max {
        let norm = inf_norm(&p);
        if norm < 1.0 {
            return Ok((tau, norm));
        }
        p = a * p;
    }
    Err(Error::NotFound(format!("no tau <= {tau_max} makes |A^(tau+1)| < 1")))
}

/// Iterates `ŵ_t = A^{τ+1} r(ŵ_{t−τ−1}) + w_t` with `ŵ_s = 0` for `s < 0`.
pub fn internal_dynamics_sim(
    a: &DMatrix<f64>,
    tau: usize,
    eta_n: f64,
    kind: ProjectionKind,
    w: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let n = a.nrows();
    if w.iter().any(|v| v.len() != n) {
        return Err(Error::Dimension("disturbance length does not match A".into()));
    }
    let gain = powers(a, tau + 1).pop().unwrap();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let mut v = w[t].clone();
        if t > tau {
            let r = residual(&out[t - tau - 1], eta_n, kind);
            v.gemv(1.0, &gain, &r, 1.0);
        }
        out.push(v);
    }
    Ok(out)
}

/// The map `ŵ ↦ (A^{τ+1} r(ŵ_{t−τ−1}))_t` whose contraction drives the small-gain argument.
pub fn residual_feedback(a: &DMatrix<f64>, tau: usize, eta_n: f64, kind: ProjectionKind, what: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let gain = powers(a, tau + 1).pop().unwrap();
    (0..what.len()).map(|t| if t > tau { &gain * residual(&what[t - tau - 1], eta_n, kind) } else { DVector::zeros(a.nrows()) }).collect()
}

fn residual(v: &DVector<f64>, eta: f64, kind: ProjectionKind) -> DVector<f64> {
    let mut p = DVector::zeros(v.len());
    project_slice(kind, eta, v.as_slice(), p.as_mut_slice());
    v - p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clm::FirClm;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn deadbeat_blend(eta: f64) -> BlendClm {
        let clm = FirClm::new(vec![scalar(1.0), scalar(0.0)], vec![scalar(-0.5), scalar(0.0)]).unwrap();
        BlendClm::linear(clm, eta).unwrap()
    }

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_element(1, x)
    }

    #[test]
    fn zero_stream_stays_zero() {
        let mut c = SlController::new(deadbeat_blend(1.0));
        for _ in 0..5 {
            assert_eq!(c.step(&v1(0.0)).unwrap(), v1(0.0));
            assert_eq!(c.estimate().unwrap(), &v1(0.0));
        }
    }

    #[test]
    fn dimension_checked() {
        let mut c = SlController::new(deadbeat_blend(1.0));
        assert!(c.step(&DVector::zeros(2)).is_err());
    }

    #[test]
    fn anti_windup_hand_step() {
        // Scalar A = 0.5, τ = 0, oversized first disturbance: ŵ_1 = A (ŵ_0 − P(ŵ_0)) + w_1.
        let a = scalar(0.5);
        let b = scalar(1.0);
        let eta = 1.0;
        let mut c = AntiWindupController::new(deadbeat_blend(eta), &a, 0).unwrap();
        let w = [2.0, 0.3, -0.2];
        let mut x = v1(w[0]);
        let mut whats = Vec::new();
        for t in 0..3 {
            let u = c.step(&x).unwrap();
            whats.push(c.estimate().unwrap()[0]);
            if t + 1 < 3 {
                x = &a * &x + &b * u + v1(w[t + 1]);
            }
        }
        assert_eq!(whats[0], 2.0);
        assert!((whats[1] - (0.5 * (2.0 - 1.0) + 0.3)).abs() < 1e-15);
        let sim = internal_dynamics_sim(&a, 0, eta, ProjectionKind::Saturation, &w.map(v1)).unwrap();
        for t in 0..3 {
            assert!((sim[t][0] - whats[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn min_tau_examples() {
        assert_eq!(min_tau(&scalar(0.5), 3).unwrap(), (0, 0.5));
        let nil = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(min_tau(&nil, 3).unwrap(), (1, 0.0));
        let stoch = DMatrix::from_row_slice(2, 2, &[0.6, 0.4, 0.4, 0.6]);
        assert!(matches!(min_tau(&stoch, 50), Err(Error::NotFound(_))));
    }

    #[test]
    fn internal_dynamics_identity_inside_ball() {
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.3, -0.2, 0.5]);
        let w: Vec<_> = (0..20).map(|t| DVector::from_vec(vec![(t as f64).sin(), (t as f64 * 0.7).cos()])).collect();
        let out = internal_dynamics_sim(&a, 2, 1.0, ProjectionKind::Radial, &w).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn marginal_scalar_recursion_stays_bounded() {
        let w: Vec<_> = (0..500).map(|t| v1(if t % 3 == 0 { 1.0 } else { -0.5 })).collect();
        let out = internal_dynamics_sim(&scalar(1.0), 0, 1.0, ProjectionKind::Saturation, &w).unwrap();
        assert!(out.iter().all(|v| v[0].abs() <= 2.0));
    }

    #[test]
    fn snapshot_round_trip() {
        let a = scalar(0.5);
        let mut c = AntiWindupController::new(deadbeat_blend(1.0), &a, 1).unwrap();
        for x in [3.0, -1.0, 0.2] {
            c.step(&v1(x)).unwrap();
        }
        let snap = ControllerSnapshot::from_json(&c.snapshot().to_json().unwrap()).unwrap();
        let mut d = AntiWindupController::new(deadbeat_blend(1.0), &a, 1).unwrap();
        d.restore(&snap).unwrap();
        for x in [0.4, 5.0, -2.0, 0.0] {
            assert_eq!(c.step(&v1(x)).unwrap(), d.step(&v1(x)).unwrap());
        }
        let mut sl = SlController::new(deadbeat_blend(1.0));
        assert!(sl.restore(&snap).is_ok());
        assert!(AntiWindupController::new(deadbeat_blend(1.0), &a, 2).unwrap().restore(&snap).is_err());
    }
}
