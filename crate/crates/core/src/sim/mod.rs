//! Closed-loop simulation of linear and input-saturated plants.
//!
//! Step order: the controller observes `x_t + v_t`, returns `u_t`; the plant
//! receives `P_{u_max}(u_t + d_t)` and advances to
//! `x_{t+1} = A x_t + B P_{u_max}(u_t + d_t) + w_{t+1}`, starting from `x_0 = w_0`.

mod chain;
mod distributed;
mod disturbance;
mod export;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chain::{chain_matrix, make_chain_plant, make_integral_controller, ChainPlant, IntegralController};
pub use distributed::{distributed_run, DistributedController, NetworkStats};
pub use disturbance::{gen_disturbance, gen_iid, DisturbanceGen};
pub use export::{summarize, write_trajectory_csv, TrajectorySummary};

use crate::clm::{blend_apply, BlendClm, LinearSystem};
use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::moments::DisturbanceModel;
use crate::projection::sat;
use crate::synthesis::SafetySpec;

pub const DEFAULT_DIVERGENCE: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub sys: LinearSystem,
    /// Saturation level applied to the input, if any.
    pub u_max: Option<f64>,
    pub horizon: usize,
    /// Additive input perturbation `d_t`.
    pub input_noise: Option<Vec<DVector<f64>>>,
    /// Measurement perturbation `v_t` seen by the controller.
    pub estimate_noise: Option<Vec<DVector<f64>>>,
    pub seed: u64,
    pub divergence_threshold: f64,
}

impl SimConfig {
    pub fn new(sys: LinearSystem, horizon: usize) -> Self {
        Self { sys, u_max: None, horizon, input_noise: None, estimate_noise: None, seed: 0, divergence_threshold: DEFAULT_DIVERGENCE }
    }

    pub fn saturated(mut self, u_max: f64) -> Self {
        self.u_max = Some(u_max);
        self
    }

    fn check(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Domain("simulation horizon must be at least 1".into()));
        }
        if let Some(u) = self.u_max {
            if !(u >= 0.0) {
                return Err(Error::Domain("u_max must be nonnegative".into()));
            }
        }
        let (n, m) = (self.sys.n(), self.sys.m());
        for (name, seq, d) in [("input", &self.input_noise, m), ("estimate", &self.estimate_noise, n)] {
            if let Some(s) = seq {
                if s.len() < self.horizon || s.iter().any(|v| v.len() != d) {
                    return Err(Error::Dimension(format!("{name} perturbation must hold {} vectors of length {d}", self.horizon)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x: Vec<DVector<f64>>,
    pub u_raw: Vec<DVector<f64>>,
    pub u_sat: Vec<DVector<f64>>,
    pub w: Vec<DVector<f64>>,
    /// Controller disturbance estimates, when the controller keeps them.
    pub what: Vec<DVector<f64>>,
    pub diverged: bool,
    pub diverged_at: Option<usize>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn max_abs_x(&self) -> f64 {
        sup(&self.x)
    }

    pub fn max_abs_u(&self) -> f64 {
        sup(&self.u_raw)
    }
}

fn sup(seq: &[DVector<f64>]) -> f64 {
    seq.iter().map(|v| v.amax()).fold(0.0, f64::max)
}

/// Runs the loop for `cfg.horizon` steps on the given disturbance sequence.
/// Divergence truncates the trajectory and sets the flag.
pub fn simulate(cfg: &SimConfig, ctrl: &mut dyn Controller, w: &[DVector<f64>]) -> Result<Trajectory> {
    cfg.check()?;
    let (n, m) = (cfg.sys.n(), cfg.sys.m());
    if ctrl.n_state() != n || ctrl.n_input() != m {
        return Err(Error::Dimension(format!("controller is {}->{}, plant needs {n}->{m}", ctrl.n_state(), ctrl.n_input())));
    }
    if w.len() < cfg.horizon || w.iter().any(|v| v.len() != n) {
        return Err(Error::Dimension(format!("disturbance must hold {} vectors of length {n}", cfg.horizon)));
    }
    let h = cfg.horizon;
    let mut tr = Trajectory {
        x: Vec::with_capacity(h),
        u_raw: Vec::with_capacity(h),
        u_sat: Vec::with_capacity(h),
        w: Vec::with_capacity(h),
        what: Vec::new(),
        diverged: false,
        diverged_at: None,
    };
    let mut x = w[0].clone();
    for t in 0..h {
        if x.iter().any(|v| !v.is_finite()) || x.amax() > cfg.divergence_threshold {
            tr.diverged = true;
            tr.diverged_at = Some(t);
            break;
        }
        let obs = match &cfg.estimate_noise {
            Some(v) => &x + &v[t],
            None => x.clone(),
        };
        let mut u = ctrl.step(&obs)?;
        if let Some(e) = ctrl.estimate() {
            tr.what.push(e.clone());
        }
        if let Some(d) = &cfg.input_noise {
            u += &d[t];
        }
        let us = match cfg.u_max {
            Some(um) => u.map(|v| sat(v, um)),
            None => u.clone(),
        };
        let next = if t + 1 < h { Some(cfg.sys.step(&x, &us, &w[t + 1])) } else { None };
        tr.x.push(x);
        tr.u_raw.push(u);
        tr.u_sat.push(us);
        tr.w.push(w[t].clone());
        match next {
            Some(v) => x = v,
            None => break,
        }
    }
    Ok(tr)
}

/// Generates the disturbance with `cfg.seed` and simulates.
pub fn simulate_gen(cfg: &SimConfig, ctrl: &mut dyn Controller, gen: &DisturbanceGen) -> Result<Trajectory> {
    let w = gen_disturbance(gen, cfg.horizon, cfg.sys.n(), cfg.seed)?;
    simulate(cfg, ctrl, &w)
}

/// Independent per-run random streams derived from one seed.
pub fn run_rng(seed: u64, run: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Monte Carlo batch of i.i.d. runs, executed in parallel; results are ordered by run index
/// and do not depend on the thread count.
pub fn monte_carlo<F>(cfg: &SimConfig, make_ctrl: F, dist: &DisturbanceModel, runs: usize) -> Result<Vec<Trajectory>>
where
    F: Fn() -> Result<Box<dyn Controller>> + Sync,
{
    dist.validate()?;
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = run_rng(cfg.seed, r as u64);
            let w = gen_iid(dist, cfg.horizon, cfg.sys.n(), &mut rng);
            let mut ctrl = make_ctrl()?;
            simulate(cfg, ctrl.as_mut(), &w)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_err: f64,
    /// Trajectories that entered the mean.
    pub used: usize,
    /// Divergent trajectories, excluded from the mean.
    pub divergent: usize,
}

/// Batch mean and standard error of the per-trajectory time-average cost after `burn_in` steps.
pub fn lqr_cost_estimate(batch: &[Trajectory], q: &DMatrix<f64>, p: &DMatrix<f64>, burn_in: usize) -> Result<CostEstimate> {
    if batch.is_empty() {
        return Err(Error::Domain("cost estimate needs at least one trajectory".into()));
    }
    let mut costs = Vec::with_capacity(batch.len());
    let mut divergent = 0;
    for tr in batch {
        if tr.diverged {
            divergent += 1;
            continue;
        }
        if tr.len() <= burn_in {
            return Err(Error::Domain(format!("trajectory of {} steps is shorter than the burn-in {burn_in}", tr.len())));
        }
        let mut acc = 0.0;
        for t in burn_in..tr.len() {
            acc += tr.x[t].dot(&(q * &tr.x[t])) + tr.u_sat[t].dot(&(p * &tr.u_sat[t]));
        }
        costs.push(acc / (tr.len() - burn_in) as f64);
    }
    let k = costs.len();
    if k == 0 {
        return Ok(CostEstimate { mean: f64::NAN, std_err: f64::NAN, used: 0, divergent });
    }
    let mean = costs.iter().sum::<f64>() / k as f64;
    let std_err = if k > 1 { (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt() } else { 0.0 };
    Ok(CostEstimate { mean, std_err, used: k, divergent })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViolationReport {
    pub max_abs_x: f64,
    pub max_abs_u: f64,
    /// First step at which `|x_t| > x_max` or `|u_t| > u_max`.
    pub first_violation: Option<usize>,
}

/// Exact peaks of the recorded states and commanded inputs against the safety bounds.
pub fn constraint_check(tr: &Trajectory, safety: &SafetySpec) -> ViolationReport {
    let first = (0..tr.len()).find(|&t| tr.x[t].amax() > safety.x_max || tr.u_raw[t].amax() > safety.u_max);
    ViolationReport { max_abs_x: tr.max_abs_x(), max_abs_u: tr.max_abs_u(), first_violation: first }
}

/// Largest `|x|` and `|u|` of the blended map over every `±eta` sign pattern of a
/// disturbance supported on one FIR window. Feasible only for `n * T <= 20`.
pub fn enumerate_bang_peak(blend: &BlendClm, eta: f64) -> Result<(f64, f64)> {
    let (n, t_h) = (blend.n(), blend.horizon());
    let bits = n * t_h;
    if bits > 20 {
        return Err(Error::TooLarge(format!("sign enumeration over {bits} entries")));
    }
    let mut best = (0.0f64, 0.0f64);
    let mut w = vec![DVector::zeros(n); 2 * t_h];
    for mask in 0u64..(1u64 << bits) {
        for k in 0..t_h {
            for i in 0..n {
                w[k][i] = if mask >> (k * n + i) & 1 == 1 { eta } else { -eta };
            }
        }
        let (x, u) = blend_apply(blend, &w)?;
        best.0 = best.0.max(sup(&x));
        best.1 = best.1.max(sup(&u));
    }
    Ok(best)
}
