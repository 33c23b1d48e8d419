//! Support masks encoding disturbance localization, communication delay and
//! actuation delay on a graph of subsystems.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::clm::FirClm;
use crate::error::{Error, Result};

/// How a mask was generated; needed by the localized runtime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalityParams {
    /// Neighbor lists, one per node (state coordinate).
    pub adjacency: Vec<Vec<usize>>,
    /// Disturbance localization radius in hops.
    pub locality_d: usize,
    /// Time steps a message needs to cross one hop. Fractions mean several hops per step.
    pub comm_delay: f64,
    /// Time steps between computing an input and its effect on the plant.
    pub act_delay: f64,
    /// Node hosting each actuator.
    pub actuator_nodes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalityMask {
    pub sx: Vec<DMatrix<bool>>,
    pub su: Vec<DMatrix<bool>>,
    pub params: Option<LocalityParams>,
}

const DELAY_EPS: f64 = 1e-9;

impl LocalityMask {
    pub fn full(n: usize, m: usize, horizon: usize) -> Self {
        Self { sx: vec![DMatrix::from_element(n, n, true); horizon], su: vec![DMatrix::from_element(m, n, true); horizon], params: None }
    }

    pub fn horizon(&self) -> usize {
        self.sx.len()
    }

    pub fn check_shape(&self, n: usize, m: usize, horizon: usize) -> Result<()> {
        let ok = self.sx.len() == horizon
            && self.su.len() == horizon
            && self.sx.iter().all(|s| s.nrows() == n && s.ncols() == n)
            && self.su.iter().all(|s| s.nrows() == m && s.ncols() == n);
        if !ok {
            return Err(Error::Dimension(format!("mask does not match n={n}, m={m}, T={horizon}")));
        }
        if (0..n).any(|i| !self.sx[0][(i, i)]) {
            return Err(Error::Mask("Sx_1 must contain the identity support".into()));
        }
        Ok(())
    }

    /// Fails if any entry outside the support is nonzero.
    pub fn check_compliance(&self, clm: &FirClm) -> Result<()> {
        self.check_shape(clm.n(), clm.m_dim(), clm.horizon())?;
        for k in 1..=clm.horizon() {
            for (name, tap, mask) in [("R", clm.r(k), &self.sx[k - 1]), ("M", clm.m(k), &self.su[k - 1])] {
                for i in 0..tap.nrows() {
                    for j in 0..tap.ncols() {
                        if !mask[(i, j)] && tap[(i, j)] != 0.0 {
                            return Err(Error::Mask(format!("{name}_{k}[{i},{j}] = {:e} lies outside the mask", tap[(i, j)])));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn support_size(&self) -> usize {
        self.sx.iter().chain(&self.su).map(|s| s.iter().filter(|b| **b).count()).sum()
    }
}

/// All-pairs hop distances by breadth-first search; `usize::MAX` when unreachable.
pub fn hop_distances(adjacency: &[Vec<usize>]) -> Result<DMatrix<usize>> {
    let n = adjacency.len();
    if adjacency.iter().flatten().any(|&j| j >= n) {
        return Err(Error::Domain("adjacency references a node outside the graph".into()));
    }
    let mut dist = DMatrix::from_element(n, n, usize::MAX);
    for s in 0..n {
        dist[(s, s)] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for &w in &adjacency[v] {
                if dist[(s, w)] == usize::MAX {
                    dist[(s, w)] = dist[(s, v)] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    Ok(dist)
}

/// `Sx_k(i, j)` holds iff `hop(i, j) <= d` and `comm_delay * hop <= k - 1`;
/// `Su_k(a, j)` additionally pays the actuation delay and measures hops from the actuator's node.
pub fn build_locality_mask(params: &LocalityParams, horizon: usize) -> Result<LocalityMask> {
    let n = params.adjacency.len();
    if n == 0 || horizon == 0 {
        return Err(Error::Domain("locality mask needs nodes and a positive horizon".into()));
    }
    if !(params.comm_delay >= 0.0 && params.act_delay >= 0.0) {
        return Err(Error::Domain("delays must be nonnegative".into()));
    }
    if params.actuator_nodes.iter().any(|&a| a >= n) {
        return Err(Error::Domain("actuator attached to a nonexistent node".into()));
    }
    let hops = hop_distances(&params.adjacency)?;
    let reach = |h: usize, k: usize, extra: f64| {
        h != usize::MAX && h <= params.locality_d && params.comm_delay * h as f64 + extra <= (k - 1) as f64 + DELAY_EPS
    };
    let m = params.actuator_nodes.len();
    let sx = (1..=horizon).map(|k| DMatrix::from_fn(n, n, |i, j| reach(hops[(i, j)], k, 0.0))).collect();
    let su =
        (1..=horizon).map(|k| DMatrix::from_fn(m, n, |a, j| reach(hops[(params.actuator_nodes[a], j)], k, params.act_delay))).collect();
    Ok(LocalityMask { sx, su, params: Some(params.clone()) })
}

/// Undirected chain `0 - 1 - ... - (n-1)`.
pub fn chain_adjacency(n: usize) -> Vec<Vec<usize>> {
    (0..n)
        .map(|i| {
            let mut v = Vec::new();
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < n {
                v.push(i + 1);
            }
            v
        })
        .collect()
}
