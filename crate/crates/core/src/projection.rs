//! Saturation and radial projections onto the ∞-norm ball, and the zone
//! decomposition they induce.
//!
//! The scalar saturation is `sign(w) * min(|w|, eta)`. A literal `max` would
//! not be a projection at all.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionKind {
    #[default]
    Saturation,
    Radial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSpec {
    kind: ProjectionKind,
    eta: f64,
}

impl ProjectionSpec {
    pub fn new(kind: ProjectionKind, eta: f64) -> Result<Self> {
        if eta.is_nan() || eta < 0.0 {
            return Err(Error::Domain(format!("projection radius must be nonnegative, got {eta}")));
        }
        Ok(Self { kind, eta })
    }

    pub fn kind(&self) -> ProjectionKind {
        self.kind
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Scalar saturation.
#[inline]
pub fn sat(w: f64, eta: f64) -> f64 {
    w.clamp(-eta, eta)
}

/// Writes `P_eta(w)` into `out`. Radius validity is the caller's job.
pub fn project_slice(kind: ProjectionKind, eta: f64, w: &[f64], out: &mut [f64]) {
    match kind {
        ProjectionKind::Saturation => {
            for (o, &v) in out.iter_mut().zip(w) {
                *o = sat(v, eta);
            }
        }
        ProjectionKind::Radial => {
            let norm = w.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if norm <= eta {
                out.copy_from_slice(w);
            } else {
                let scale = eta / norm;
                for (o, &v) in out.iter_mut().zip(w) {
                    *o = v * scale;
                }
            }
        }
    }
}

pub fn project(spec: &ProjectionSpec, w: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(w.len());
    project_slice(spec.kind, spec.eta, w.as_slice(), out.as_mut_slice());
    out
}

/// Checks `0 <= eta_1 <= ... <= eta_N`.
pub fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.is_empty() {
        return Err(Error::Domain("at least one zone radius is required".into()));
    }
    let mut prev = 0.0;
    for (i, &r) in radii.iter().enumerate() {
        if r.is_nan() || r < prev {
            return Err(Error::Domain(format!("radii must be nonnegative and nondecreasing (eta_{} = {r} after {prev})", i + 1)));
        }
        prev = r;
    }
    Ok(())
}

/// Fills `out[i]` with `(P_{eta_i} - P_{eta_{i-1}})(w)`, `eta_0 = 0`. No radius checks.
pub fn zone_decompose_into(radii: &[f64], kind: ProjectionKind, w: &[f64], out: &mut [DVector<f64>]) {
    let n = w.len();
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    for (i, &eta) in radii.iter().enumerate() {
        project_slice(kind, eta, w, &mut cur);
        let d = &mut out[i];
        for j in 0..n {
            d[j] = cur[j] - prev[j];
        }
        std::mem::swap(&mut prev, &mut cur);
    }
}

pub fn zone_decompose(radii: &[f64], kind: ProjectionKind, w: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    check_radii(radii)?;
    let mut out = vec![DVector::zeros(w.len()); radii.len()];
    zone_decompose_into(radii, kind, w.as_slice(), &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn sat1() -> ProjectionSpec {
        ProjectionSpec::new(ProjectionKind::Saturation, 1.0).unwrap()
    }

    #[test]
    fn saturation_identity_inside() {
        assert_eq!(project(&sat1(), &v(&[0.5, -0.3])), v(&[0.5, -0.3]));
    }

    #[test]
    fn saturation_clamps() {
        assert_eq!(project(&sat1(), &v(&[2.0, -3.0])), v(&[1.0, -1.0]));
    }

    #[test]
    fn radial_rescales() {
        let spec = ProjectionSpec::new(ProjectionKind::Radial, 2.0).unwrap();
        assert_eq!(project(&spec, &v(&[3.0, 4.0])), v(&[1.5, 2.0]));
    }

    #[test]
    fn radial_zero_vector() {
        let spec = ProjectionSpec::new(ProjectionKind::Radial, 0.0).unwrap();
        assert_eq!(project(&spec, &v(&[0.0, 0.0])), v(&[0.0, 0.0]));
    }

    #[test]
    fn negative_radius_rejected() {
        assert!(ProjectionSpec::new(ProjectionKind::Radial, -1.0).is_err());
    }

    #[test]
    fn zone_small_signal() {
        let d = zone_decompose(&[0.5, 1.0], ProjectionKind::Saturation, &v(&[0.3])).unwrap();
        assert_eq!(d, vec![v(&[0.3]), v(&[0.0])]);
    }

    #[test]
    fn zone_split() {
        let d = zone_decompose(&[0.5, 1.0], ProjectionKind::Saturation, &v(&[0.8])).unwrap();
        assert!((d[0][0] - 0.5).abs() < 1e-15);
        assert!((d[1][0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zone_radial_example() {
        let w = v(&[3.0, -1.2, 0.4]);
        let d = zone_decompose(&[1.0, 2.0], ProjectionKind::Radial, &w).unwrap();
        let p2 = project(&ProjectionSpec::new(ProjectionKind::Radial, 2.0).unwrap(), &w);
        let p1 = project(&ProjectionSpec::new(ProjectionKind::Radial, 1.0).unwrap(), &w);
        assert!((d[0].amax() - 1.0).abs() < 1e-15);
        assert!((d[1].amax() - 1.0).abs() < 1e-15);
        assert!((&d[0] + &d[1] - &p2).amax() < 1e-15);
        assert_eq!(d[0], p1);
    }

    #[test]
    fn unsorted_radii_rejected() {
        assert!(zone_decompose(&[1.0, 0.5], ProjectionKind::Saturation, &v(&[0.0])).is_err());
    }

    fn kind() -> impl Strategy<Value = ProjectionKind> {
        prop_oneof![Just(ProjectionKind::Saturation), Just(ProjectionKind::Radial)]
    }

    fn radii() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.0f64..3.0, 1..5).prop_map(|mut r| {
            r.sort_by(|a, b| a.partial_cmp(b).unwrap());
            r
        })
    }

    proptest! {
        #[test]
        fn identity_on_ball(k in kind(), w in prop::collection::vec(-1.0f64..1.0, 1..6), slack in 0.0f64..2.0) {
            let w = DVector::from_vec(w);
            let eta = w.amax() + slack;
            let spec = ProjectionSpec::new(k, eta).unwrap();
            prop_assert_eq!(project(&spec, &w), w);
        }

        #[test]
        fn output_in_ball(k in kind(), w in prop::collection::vec(-5.0f64..5.0, 1..6), eta in 0.0f64..3.0) {
            let w = DVector::from_vec(w);
            let p = project(&ProjectionSpec::new(k, eta).unwrap(), &w);
            prop_assert!(p.amax() <= eta * (1.0 + 1e-15));
            if k == ProjectionKind::Radial && w.amax() >= eta {
                prop_assert!((p.amax() - eta).abs() <= 1e-12 * eta.max(1.0));
            }
        }

        #[test]
        fn telescoping_and_zone_bounds(k in kind(), r in radii(), w in prop::collection::vec(-4.0f64..4.0, 1..6)) {
            let w = DVector::from_vec(w);
            let d = zone_decompose(&r, k, &w).unwrap();
            let total = d.iter().fold(DVector::zeros(w.len()), |acc, di| acc + di);
            let top = project(&ProjectionSpec::new(k, *r.last().unwrap()).unwrap(), &w);
            prop_assert!((total - top).amax() <= 1e-12);
            let mut prev = 0.0;
            for (di, &eta) in d.iter().zip(&r) {
                prop_assert!(di.amax() <= (eta - prev) + 1e-12);
                prev = eta;
            }
        }

        #[test]
        fn kinds_coincide_in_one_dimension(x in -5.0f64..5.0, eta in 0.0f64..3.0) {
            let w = DVector::from_element(1, x);
            let a = project(&ProjectionSpec::new(ProjectionKind::Saturation, eta).unwrap(), &w);
            let b = project(&ProjectionSpec::new(ProjectionKind::Radial, eta).unwrap(), &w);
            prop_assert!((a - b).amax() <= 1e-15);
        }
    }
}
