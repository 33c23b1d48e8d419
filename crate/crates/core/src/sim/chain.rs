use nalgebra::{DMatrix, DVector};

use crate::clm::LinearSystem;
use crate::controller::Controller;
use crate::error::{Error, Result};
use crate::linalg::spectral_radius;
use crate::synthesis::chain_adjacency;

/// `x^i_{t+1} = (1 - c |N(i)|) x^i_t + c sum_{j in N(i)} x^j_t` on an undirected chain.
pub fn chain_matrix(nodes: usize, coupling: f64) -> Result<DMatrix<f64>> {
    if nodes < 2 {
        return Err(Error::Domain("a chain needs at least two nodes".into()));
    }
    let adj = chain_adjacency(nodes);
    let mut a = DMatrix::zeros(nodes, nodes);
    for (i, nb) in adj.iter().enumerate() {
        a[(i, i)] = 1.0 - coupling * nb.len() as f64;
        for &j in nb {
            a[(i, j)] = coupling;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone)]
pub struct ChainPlant {
    pub sys: LinearSystem,
    pub adjacency: Vec<Vec<usize>>,
    pub actuator_nodes: Vec<usize>,
}

/// Chain plant with one scalar actuator per listed node; every other node
/// (odd 0-based indices) when `actuator_nodes` is `None`.
pub fn make_chain_plant(nodes: usize, coupling: f64, actuator_nodes: Option<Vec<usize>>) -> Result<ChainPlant> {
    let a = chain_matrix(nodes, coupling)?;
    let act = actuator_nodes.unwrap_or_else(|| (1..nodes).step_by(2).collect());
    if act.is_empty() || act.iter().any(|&j| j >= nodes) {
        return Err(Error::Domain("actuators must sit on existing nodes".into()));
    }
    let b = DMatrix::from_fn(nodes, act.len(), |i, k| if act[k] == i { 1.0 } else { 0.0 });
    Ok(ChainPlant { sys: LinearSystem::new(a, b)?, adjacency: chain_adjacency(nodes), actuator_nodes: act })
}

/// Per-actuator PI law `u_t = -kp x_t - ki z_t`, `z_{t+1} = z_t + x_t` on the actuated node.
#[derive(Debug, Clone)]
pub struct IntegralController {
    pub kp: f64,
    pub ki: f64,
    nodes: Vec<usize>,
    n: usize,
    z: DVector<f64>,
    /// Spectral radius of the unsaturated closed loop.
    pub spectral_radius: f64,
    /// False when the unsaturated closed loop is not Schur stable.
    pub stable: bool,
}

pub fn make_integral_controller(sys: &LinearSystem, actuator_nodes: &[usize], kp: f64, ki: f64) -> Result<IntegralController> {
    let (n, m) = (sys.n(), sys.m());
    if !(kp.is_finite() && ki.is_finite()) {
        return Err(Error::Domain("gains must be finite".into()));
    }
    if actuator_nodes.len() != m || actuator_nodes.iter().any(|&j| j >= n) {
        return Err(Error::Dimension(format!("need one node per actuator ({m})")));
    }
    let c = DMatrix::from_fn(m, n, |k, i| if actuator_nodes[k] == i { 1.0 } else { 0.0 });
    let mut cl = DMatrix::zeros(n + m, n + m);
    cl.view_mut((0, 0), (n, n)).copy_from(&(sys.a() - sys.b() * &c * kp));
    cl.view_mut((0, n), (n, m)).copy_from(&(sys.b() * -ki));
    cl.view_mut((n, 0), (m, n)).copy_from(&c);
    cl.view_mut((n, n), (m, m)).fill_with_identity();
    let rho = spectral_radius(&cl);
    Ok(IntegralController { kp, ki, nodes: actuator_nodes.to_vec(), n, z: DVector::zeros(m), spectral_radius: rho, stable: rho < 1.0 })
}

impl IntegralController {
    pub fn integrator(&self) -> &DVector<f64> {
        &self.z
    }
}

impl Controller for IntegralController {
    fn n_state(&self) -> usize {
        self.n
    }

    fn n_input(&self) -> usize {
        self.nodes.len()
    }

    fn step(&mut self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::Dimension(format!("state has length {}, expected {}", x.len(), self.n)));
        }
        let xa = DVector::from_iterator(self.nodes.len(), self.nodes.iter().map(|&j| x[j]));
        let u = -&xa * self.kp - &self.z * self.ki;
        self.z += xa;
        Ok(u)
    }
}
