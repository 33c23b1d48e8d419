#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use slsblend_core::{BlendClm, FirClm, LinearSystem, ProjectionKind};

/// Fully actuated plant with a random `A` of the given spectral scale.
pub fn random_plant<R: Rng>(rng: &mut R, n: usize, scale: f64) -> LinearSystem {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    LinearSystem::new(a, DMatrix::identity(n, n)).unwrap()
}

/// Random `R_2..R_T`; the inputs are chosen so the FIR recursion holds exactly with `B = I`.
pub fn random_fir<R: Rng>(rng: &mut R, sys: &LinearSystem, horizon: usize, size: f64) -> FirClm {
    let n = sys.n();
    let mut r = vec![DMatrix::identity(n, n)];
    for _ in 1..horizon {
        r.push(DMatrix::from_fn(n, n, |_, _| rng.random_range(-size..size)));
    }
    let m = (0..horizon)
        .map(|k| {
            let next = if k + 1 < horizon { r[k + 1].clone() } else { DMatrix::zeros(n, n) };
            next - sys.a() * &r[k]
        })
        .collect();
    FirClm::new(r, m).unwrap()
}

pub fn random_blend<R: Rng>(rng: &mut R, sys: &LinearSystem, horizon: usize, radii: &[f64], kind: ProjectionKind) -> BlendClm {
    let zones = radii.iter().map(|_| random_fir(rng, sys, horizon, 0.3)).collect();
    BlendClm::new(zones, radii.to_vec(), kind).unwrap()
}
