//! Shared fixtures for the benchmarks.

use nalgebra::DMatrix;
use slsblend_core::sim::make_chain_plant;
use slsblend_core::synthesis::{build_locality_mask, IntegralConstraint, LocalityMask, LocalityParams};
use slsblend_core::{DisturbanceModel, LinearSystem, SafetySpec, SynthesisSetup};

/// Three-state plant driven through its last coordinate.
pub fn three_state_setup(horizon: usize) -> SynthesisSetup {
    let a = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 1.0]);
    let b = DMatrix::from_column_slice(3, 1, &[0.0, 0.0, 1.0]);
    let sys = LinearSystem::new(a, b).expect("valid plant");
    SynthesisSetup::new(
        sys,
        DMatrix::identity(3, 3),
        DMatrix::from_element(1, 1, 10.0),
        horizon,
        DisturbanceModel::truncated_gaussian(0.1, 1.0),
        SafetySpec::new(15.0, 40.0, 1.0).expect("positive bounds"),
    )
}

/// Localized chain problem with actuators on every other node.
pub fn chain_setup(nodes: usize, horizon: usize) -> (SynthesisSetup, LocalityMask) {
    let plant = make_chain_plant(nodes, 0.4, None).expect("chain");
    let m = plant.actuator_nodes.len();
    let params = LocalityParams {
        adjacency: plant.adjacency.clone(),
        locality_d: 5,
        comm_delay: 0.5,
        act_delay: 1.0,
        actuator_nodes: plant.actuator_nodes.clone(),
    };
    let mask = build_locality_mask(&params, horizon).expect("mask");
    let mut setup = SynthesisSetup::new(
        plant.sys,
        DMatrix::identity(nodes, nodes),
        DMatrix::identity(m, m),
        horizon,
        DisturbanceModel::uniform(1.0),
        SafetySpec::new(10.0, 3.0, 1.0).expect("positive bounds"),
    );
    setup.mask = Some(mask.clone());
    setup.integral = vec![IntegralConstraint { zone: 0, columns: (0..m).map(|k| 2 * k + 1).collect() }];
    (setup, mask)
}
