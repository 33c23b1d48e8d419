//! Localized implementation of a blended controller as per-node agents.
//!
//! Node `i` owns coordinate `i` of the disturbance estimate and the actuators
//! attached to it. After computing `ŵ_t[i]` it broadcasts the scalar, and the
//! value is relayed hop by hop, each hop taking `comm_delay` time units, up to
//! the locality radius. An agent only reads values that have already arrived;
//! inputs additionally respect the actuation delay. Requires the entrywise
//! saturation projection so zone pieces are computable per coordinate.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{simulate, SimConfig, Trajectory};
use crate::clm::BlendClm;
use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::linalg::powers;
use crate::projection::{sat, ProjectionKind};
use crate::synthesis::{LocalityMask, LocalityParams};

const TIME_EPS: f64 = 1e-9;

type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, Copy)]
struct Message {
    src: usize,
    time: usize,
    value: f64,
    hops: usize,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    at: f64,
    seq: u64,
    dest: usize,
    msg: Message,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest event first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.at.total_cmp(&self.at).then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NetworkStats {
    pub messages_sent: usize,
    pub deliveries: usize,
    pub max_hops: usize,
}

#[derive(Debug, Clone)]
struct Agent {
    /// `r_rows[z][k-1]`: row `node` of `R^(z)_k`, nonzeros only.
    r_rows: Vec<Vec<SparseRow>>,
    /// `(actuator, m_rows[z][k-1])` for actuators hosted here.
    actuators: Vec<(usize, Vec<Vec<SparseRow>>)>,
    /// `a_rows[k]`: row `node` of `A^k`, `k = 1..=tau`.
    a_rows: Vec<SparseRow>,
    /// `(src, time) -> (value, arrival time)`.
    known: HashMap<(usize, usize), (f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct DistributedController {
    agents: Vec<Agent>,
    neighbors: Vec<Vec<usize>>,
    radii: Vec<f64>,
    horizon: usize,
    tau: Option<usize>,
    comm_delay: f64,
    act_delay: f64,
    max_hops: usize,
    m: usize,
    queue: BinaryHeap<Event>,
    seq: u64,
    t: usize,
    what: Option<DVector<f64>>,
    pub stats: NetworkStats,
}

fn row_of(m: &DMatrix<f64>, i: usize) -> SparseRow {
    (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect()
}

impl DistributedController {
    /// `anti_windup` carries the plant `A` and the delay compensation depth `tau`.
    pub fn new(blend: &BlendClm, mask: &LocalityMask, anti_windup: Option<(&DMatrix<f64>, usize)>) -> Result<Self> {
        let params: &LocalityParams =
            mask.params.as_ref().ok_or_else(|| Error::Mask("the localized runtime needs a mask built from locality parameters".into()))?;
        if blend.projection() != ProjectionKind::Saturation {
            return Err(Error::Mask("the localized runtime needs the entrywise saturation projection".into()));
        }
        for z in blend.zones() {
            mask.check_compliance(z)?;
        }
        let n = blend.n();
        if params.adjacency.len() != n || params.actuator_nodes.len() != blend.m_dim() {
            return Err(Error::Dimension("locality parameters do not match the blend".into()));
        }
        if !(params.comm_delay >= 0.0 && params.act_delay >= 0.0) {
            return Err(Error::Domain("delays must be nonnegative".into()));
        }
        let apow = match anti_windup {
            Some((a, tau)) => {
                if a.nrows() != n || a.ncols() != n {
                    return Err(Error::Dimension(format!("A must be {n}x{n}")));
                }
                powers(a, tau)
            }
            None => Vec::new(),
        };
        let agents = (0..n)
            .map(|i| Agent {
                r_rows: blend.zones().iter().map(|z| z.r_taps().iter().map(|r| row_of(r, i)).collect()).collect(),
                actuators: params
                    .actuator_nodes
                    .iter()
                    .enumerate()
                    .filter(|(_, &node)| node == i)
                    .map(|(a, _)| (a, blend.zones().iter().map(|z| z.m_taps().iter().map(|mk| row_of(mk, a)).collect()).collect()))
                    .collect(),
                a_rows: apow.iter().skip(1).map(|p| row_of(p, i)).collect(),
                known: HashMap::new(),
            })
            .collect();
        Ok(Self {
            agents,
            neighbors: params.adjacency.clone(),
            radii: blend.radii().to_vec(),
            horizon: blend.horizon(),
            tau: anti_windup.map(|(_, t)| t),
            comm_delay: params.comm_delay,
            act_delay: params.act_delay,
            max_hops: params.locality_d,
            m: blend.m_dim(),
            queue: BinaryHeap::new(),
            seq: 0,
            t: 0,
            what: None,
            stats: NetworkStats::default(),
        })
    }

    fn piece(&self, z: usize, v: f64) -> f64 {
        let lo = if z == 0 { 0.0 } else { sat(v, self.radii[z - 1]) };
        sat(v, self.radii[z]) - lo
    }

    fn lookup(&self, agent: usize, src: usize, time: usize, deadline: f64) -> Result<f64> {
        match self.agents[agent].known.get(&(src, time)) {
            Some(&(v, arrived)) if arrived <= deadline + TIME_EPS => Ok(v),
            _ => Err(Error::Mask(format!(
                "node {agent} needs the estimate of node {src} from step {time} before it can arrive (deadline {deadline})"
            ))),
        }
    }

    fn send(&mut self, from: usize, msg: Message, now: f64) {
        for &nb in &self.neighbors[from] {
            self.seq += 1;
            self.stats.messages_sent += 1;
            self.queue.push(Event { at: now + self.comm_delay, seq: self.seq, dest: nb, msg: Message { hops: msg.hops + 1, ..msg } });
        }
    }

    fn deliver_until(&mut self, now: f64) {
        while let Some(ev) = self.queue.peek().copied() {
            if ev.at > now + TIME_EPS {
                break;
            }
            self.queue.pop();
            let agent = &mut self.agents[ev.dest];
            if agent.known.contains_key(&(ev.msg.src, ev.msg.time)) {
                continue;
            }
            agent.known.insert((ev.msg.src, ev.msg.time), (ev.msg.value, ev.at));
            self.stats.deliveries += 1;
            self.stats.max_hops = self.stats.max_hops.max(ev.msg.hops);
            if ev.msg.hops < self.max_hops {
                self.send(ev.dest, ev.msg, ev.at);
            }
        }
    }

    fn local_estimate(&self, i: usize, xi: f64) -> Result<f64> {
        let t = self.t;
        let now = t as f64;
        let agent = &self.agents[i];
        let mut v = xi;
        for (z, rows) in agent.r_rows.iter().enumerate() {
            for k in 2..=self.horizon.min(t + 1) {
                let s = t + 1 - k;
                for &(j, val) in &rows[k - 1] {
                    v -= val * self.piece(z, self.lookup(i, j, s, now)?);
                }
            }
        }
        if let Some(tau) = self.tau {
            let eta = *self.radii.last().unwrap();
            for k in 2..=(tau + 1).min(t + 1) {
                let s = t + 1 - k;
                for &(j, val) in &agent.a_rows[k - 2] {
                    let wj = self.lookup(i, j, s, now)?;
                    v -= val * (wj - sat(wj, eta));
                }
            }
        }
        Ok(v)
    }

    fn local_inputs(&self, i: usize, u: &mut DVector<f64>) -> Result<()> {
        let t = self.t;
        let deadline = t as f64 - self.act_delay;
        for (a, rows) in &self.agents[i].actuators {
            let mut acc = 0.0;
            for (z, zr) in rows.iter().enumerate() {
                for k in 1..=self.horizon.min(t + 1) {
                    let s = t + 1 - k;
                    for &(j, val) in &zr[k - 1] {
                        acc += val * self.piece(z, self.lookup(i, j, s, deadline)?);
                    }
                }
            }
            u[*a] = acc;
        }
        Ok(())
    }
}

impl Controller for DistributedController {
    fn n_state(&self) -> usize {
        self.agents.len()
    }

    fn n_input(&self) -> usize {
        self.m
    }

    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.agents.len();
        if x.len() != n {
            return Err(Error::Dimension(format!("state has length {}, expected {n}", x.len())));
        }
        let now = self.t as f64;
        self.deliver_until(now);
        let est = (0..n).map(|i| self.local_estimate(i, x[i])).collect::<Result<Vec<f64>>>()?;
        for (i, &v) in est.iter().enumerate() {
            let t = self.t;
            self.agents[i].known.insert((i, t), (v, now));
            self.send(i, Message { src: i, time: t, value: v, hops: 0 }, now);
        }
        self.deliver_until(now);
        let mut u = DVector::zeros(self.m);
        for i in 0..n {
            self.local_inputs(i, &mut u)?;
        }
        let keep = self.horizon.max(self.tau.map_or(0, |t| t + 1));
        if self.t + 1 >= keep {
            let oldest = self.t + 1 - keep;
            for agent in &mut self.agents {
                agent.known.retain(|&(_, s), _| s >= oldest);
            }
        }
        self.what = Some(DVector::from_vec(est));
        self.t += 1;
        Ok(u)
    }

    fn estimate(&self) -> Option<&DVector<f64>> {
        self.what.as_ref()
    }
}

/// Simulates the plant under the localized runtime.
pub fn distributed_run(
    cfg: &SimConfig,
    blend: &BlendClm,
    mask: &LocalityMask,
    tau: Option<usize>,
    w: &[DVector<f64>],
) -> Result<(Trajectory, NetworkStats)> {
    let a = cfg.sys.a().clone();
    let mut ctrl = DistributedController::new(blend, mask, tau.map(|t| (&a, t)))?;
    let tr = simulate(cfg, &mut ctrl, w)?;
    Ok((tr, ctrl.stats))
}
