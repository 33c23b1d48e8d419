use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::run_rng;
use crate::error::{Error, Result};
use crate::moments::DisturbanceModel;

fn default_step_nodes() -> Vec<usize> {
    vec![7, 9, 11]
}

fn default_step_times() -> Vec<usize> {
    vec![2, 6, 10]
}

/// Disturbance regimes. Node indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceGen {
    Zero,
    /// Entrywise i.i.d. draws.
    Iid {
        dist: DisturbanceModel,
    },
    /// Synchronized `±eta` square wave; `+eta` for the first half period.
    WorstCaseBang {
        eta: f64,
        period: usize,
        /// Nodes that receive the wave; all when absent.
        #[serde(default)]
        nodes: Option<Vec<usize>>,
    },
    /// Persistent steps of `amplitude` entering `nodes[j]` at `times[j]`.
    StaggeredSteps {
        amplitude: f64,
        #[serde(default = "default_step_nodes")]
        nodes: Vec<usize>,
        #[serde(default = "default_step_times")]
        times: Vec<usize>,
    },
    Impulse {
        node: usize,
        amplitude: f64,
        #[serde(default)]
        time: usize,
    },
    /// Explicit rows `w_t`; padded with zeros past its end.
    Custom {
        w: Vec<Vec<f64>>,
    },
}

impl DisturbanceGen {
    pub fn staggered(amplitude: f64) -> Self {
        Self::StaggeredSteps { amplitude, nodes: default_step_nodes(), times: default_step_times() }
    }

    /// Declared `|w|_inf` bound, if the kind has one.
    pub fn bound(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Iid { dist } => Some(dist.eta_max()),
            Self::WorstCaseBang { eta, .. } => Some(*eta),
            Self::StaggeredSteps { amplitude, .. } | Self::Impulse { amplitude, .. } => Some(amplitude.abs()),
            Self::Custom { .. } => None,
        }
    }
}

pub fn gen_iid<R: Rng + ?Sized>(dist: &DisturbanceModel, horizon: usize, n: usize, rng: &mut R) -> Vec<DVector<f64>> {
    (0..horizon).map(|_| DVector::from_fn(n, |_, _| dist.sample(rng))).collect()
}

pub fn gen_disturbance(gen: &DisturbanceGen, horizon: usize, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let node_check = |nodes: &[usize]| -> Result<()> {
        match nodes.iter().find(|&&j| j >= n) {
            Some(j) => Err(Error::Domain(format!("node {j} does not exist in a {n}-node plant"))),
            None => Ok(()),
        }
    };
    let mut w = vec![DVector::zeros(n); horizon];
    match gen {
        DisturbanceGen::Zero => {}
        DisturbanceGen::Iid { dist } => {
            dist.validate()?;
            w = gen_iid(dist, horizon, n, &mut run_rng(seed, 0));
        }
        DisturbanceGen::WorstCaseBang { eta, period, nodes } => {
            if *period < 2 || !(*eta >= 0.0) {
                return Err(Error::Domain("bang needs period >= 2 and eta >= 0".into()));
            }
            let all: Vec<usize> = (0..n).collect();
            let nodes = nodes.as_deref().unwrap_or(&all);
            node_check(nodes)?;
            let half = period / 2;
            for (t, wt) in w.iter_mut().enumerate() {
                let v = if (t / half) % 2 == 0 { *eta } else { -*eta };
                for &j in nodes {
                    wt[j] = v;
                }
            }
        }
        DisturbanceGen::StaggeredSteps { amplitude, nodes, times } => {
            if nodes.len() != times.len() {
                return Err(Error::Domain("staggered steps need one entry time per node".into()));
            }
            node_check(nodes)?;
            for (&j, &t0) in nodes.iter().zip(times) {
                for wt in w.iter_mut().skip(t0) {
                    wt[j] += amplitude;
                }
            }
        }
        DisturbanceGen::Impulse { node, amplitude, time } => {
            node_check(&[*node])?;
            if *time < horizon {
                w[*time][*node] = *amplitude;
            }
        }
        DisturbanceGen::Custom { w: rows } => {
            for (t, row) in rows.iter().enumerate().take(horizon) {
                if row.len() != n {
                    return Err(Error::Dimension(format!("custom disturbance row {t} has length {}, expected {n}", row.len())));
                }
                w[t] = DVector::from_column_slice(row);
            }
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn impulse_and_steps() {
        let w = gen_disturbance(&DisturbanceGen::Impulse { node: 2, amplitude: 1.0, time: 0 }, 4, 3, 0).unwrap();
        assert_eq!(w[0], DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert!(w[1..].iter().all(|v| v.iter().all(|x| *x == 0.0)));

        let w = gen_disturbance(&DisturbanceGen::staggered(0.1), 12, 20, 0).unwrap();
        assert_eq!(w[1].amax(), 0.0);
        assert_eq!(w[2][7], 0.1);
        assert_eq!(w[5][9], 0.0);
        assert_eq!(w[6][9], 0.1);
        assert_eq!(w[11][11], 0.1);
        assert_eq!(w[11].iter().filter(|v| **v != 0.0).count(), 3);
    }

    #[test]
    fn bang_is_a_square_wave() {
        let w = gen_disturbance(&DisturbanceGen::WorstCaseBang { eta: 2.0, period: 4, nodes: None }, 8, 2, 0).unwrap();
        let s: Vec<f64> = w.iter().map(|v| v[1]).collect();
        assert_eq!(s, vec![2.0, 2.0, -2.0, -2.0, 2.0, 2.0, -2.0, -2.0]);
    }

    #[test]
    fn iid_is_seeded_and_bounded() {
        let g = DisturbanceGen::Iid { dist: DisturbanceModel::truncated_gaussian(0.5, 1.0) };
        let a = gen_disturbance(&g, 200, 3, 9).unwrap();
        assert_eq!(a, gen_disturbance(&g, 200, 3, 9).unwrap());
        assert_ne!(a, gen_disturbance(&g, 200, 3, 10).unwrap());
        assert!(a.iter().all(|v| v.amax() <= 1.0));
    }

    #[test]
    fn config_round_trip() {
        let g: DisturbanceGen = serde_json::from_str(r#"{"kind":"staggered-steps","amplitude":0.1}"#).unwrap();
        assert_eq!(g, DisturbanceGen::staggered(0.1));
        let g: DisturbanceGen = serde_json::from_str(r#"{"kind":"iid","dist":{"family":"uniform","eta_max":0.5}}"#).unwrap();
        assert_eq!(g.bound(), Some(0.5));
        assert!(serde_json::from_str::<DisturbanceGen>(r#"{"kind":"impulse","node":1,"amplitude":1.0,"bogus":2}"#).is_err());
    }
}
