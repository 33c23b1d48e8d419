mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slsblend_core::{blend_apply, validate_fir_clm, BlendClm, Closure, ProjectionKind};

fn project(kind: ProjectionKind, eta: f64, v: &DVector<f64>) -> DVector<f64> {
    match kind {
        ProjectionKind::Saturation => v.map(|x| x.clamp(-eta, eta)),
        ProjectionKind::Radial => {
            let s = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if s <= eta {
                v.clone()
            } else {
                v * (eta / s)
            }
        }
    }
}

/// `x_t = Σ_i Σ_k R^(i)_k (P_{η_i} - P_{η_{i-1}})(w_{t+1-k})`, written out term by term.
fn straight_line(blend: &BlendClm, w: &[DVector<f64>]) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let kind = blend.projection();
    let mut xs = Vec::new();
    let mut us = Vec::new();
    for t in 0..w.len() {
        let mut x = DVector::zeros(blend.n());
        let mut u = DVector::zeros(blend.m_dim());
        let mut lower = 0.0;
        for (zone, &eta) in blend.zones().iter().zip(blend.radii()) {
            for k in 1..=blend.horizon().min(t + 1) {
                let v = &w[t + 1 - k];
                let d = project(kind, eta, v) - project(kind, lower, v);
                x += zone.r(k) * &d;
                u += zone.m(k) * &d;
            }
            lower = eta;
        }
        xs.push(x);
        us.push(u);
    }
    (xs, us)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn blend_matches_term_by_term_sum(seed in any::<u64>(), n in 1usize..4, horizon in 2usize..6,
                                      radial in any::<bool>(), w in prop::collection::vec(-2.0f64..2.0, 36)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sys = common::random_plant(&mut rng, n, 1.2);
        let kind = if radial { ProjectionKind::Radial } else { ProjectionKind::Saturation };
        let blend = common::random_blend(&mut rng, &sys, horizon, &[0.2, 0.7, 1.0], kind);
        for z in blend.zones() {
            prop_assert!(validate_fir_clm(z, &sys, 1e-10, Closure::General).unwrap().max_residual() <= 1e-10);
        }
        let ws: Vec<_> = w.chunks(n).take(36 / n).map(DVector::from_column_slice).collect();
        let (x, u) = blend_apply(&blend, &ws).unwrap();
        let (xr, ur) = straight_line(&blend, &ws);
        for t in 0..ws.len() {
            prop_assert!((&x[t] - &xr[t]).amax() <= 1e-12);
            prop_assert!((&u[t] - &ur[t]).amax() <= 1e-12);
        }
    }
}
