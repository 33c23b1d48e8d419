//! Scalar disturbance models and the projected second moments `alpha_ij`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_sym_eigenvalue, sym_sqrt};
use crate::projection::{check_radii, sat};
use crate::quadrature::integrate;

pub const QUAD_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Centered, symmetric scalar density supported on `[-eta_max, eta_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DisturbanceModel {
    Uniform {
        eta_max: f64,
    },
    /// Gaussian restricted to the support and renormalized.
    TruncatedGaussian {
        sigma: f64,
        eta_max: f64,
    },
    /// Symmetric atoms; `eta_max` is the largest `|value|`.
    PointMassList {
        values: Vec<f64>,
        weights: Vec<f64>,
    },
    /// Gaussian whose tail mass is moved onto the endpoints `±eta_max`.
    PointMassAugmented {
        sigma: f64,
        eta_max: f64,
    },
}

fn normal_pdf(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn central_mass(sigma: f64, eta: f64) -> f64 {
    libm::erf(eta / (sigma * std::f64::consts::SQRT_2))
}

impl DisturbanceModel {
    pub fn uniform(eta_max: f64) -> Self {
        Self::Uniform { eta_max }
    }

    pub fn truncated_gaussian(sigma: f64, eta_max: f64) -> Self {
        Self::TruncatedGaussian { sigma, eta_max }
    }

    pub fn eta_max(&self) -> f64 {
        match self {
            Self::Uniform { eta_max } | Self::TruncatedGaussian { eta_max, .. } | Self::PointMassAugmented { eta_max, .. } => *eta_max,
            Self::PointMassList { values, .. } => values.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    /// Density of the continuous part.
    pub fn density(&self, w: f64) -> f64 {
        match *self {
            Self::Uniform { eta_max } => {
                if w.abs() <= eta_max {
                    0.5 / eta_max
                } else {
                    0.0
                }
            }
            Self::TruncatedGaussian { sigma, eta_max } => {
                if w.abs() <= eta_max {
                    normal_pdf(w, sigma) / central_mass(sigma, eta_max)
                } else {
                    0.0
                }
            }
            Self::PointMassAugmented { sigma, eta_max } => {
                if w.abs() <= eta_max {
                    normal_pdf(w, sigma)
                } else {
                    0.0
                }
            }
            Self::PointMassList { .. } => 0.0,
        }
    }

    /// Atoms `(value, probability)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            Self::PointMassList { values, weights } => values.iter().cloned().zip(weights.iter().cloned()).collect(),
            Self::PointMassAugmented { sigma, eta_max } => {
                let tail = 0.5 * (1.0 - central_mass(*sigma, *eta_max));
                vec![(-eta_max, tail), (*eta_max, tail)]
            }
            _ => Vec::new(),
        }
    }

    fn has_density(&self) -> bool {
        !matches!(self, Self::PointMassList { .. })
    }

    /// `E[f(w)]`, splitting the integral at `breaks` (and at 0).
    pub fn expect(&self, f: impl Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        if self.has_density() {
            let eta = self.eta_max();
            let mut pts: Vec<f64> = breaks.iter().flat_map(|&b| [b, -b]).collect();
            pts.push(0.0);
            total += integrate(|w| f(w) * self.density(w), -eta, eta, &pts, QUAD_TOL)?;
        }
        for (v, p) in self.atoms() {
            total += p * f(v);
        }
        Ok(total)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Domain(msg));
        match self {
            Self::Uniform { eta_max } => {
                if !(eta_max.is_finite() && *eta_max > 0.0) {
                    return bad(format!("uniform eta_max must be positive, got {eta_max}"));
                }
            }
            Self::TruncatedGaussian { sigma, eta_max } | Self::PointMassAugmented { sigma, eta_max } => {
                if !(sigma.is_finite() && *sigma > 0.0 && eta_max.is_finite() && *eta_max > 0.0) {
                    return bad(format!("gaussian needs sigma > 0 and eta_max > 0, got {sigma}, {eta_max}"));
                }
            }
            Self::PointMassList { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return bad("point masses need matching, nonempty values and weights".into());
                }
                if values.iter().chain(weights).any(|v| !v.is_finite()) || weights.iter().any(|&p| p < 0.0) {
                    return bad("point masses must be finite with nonnegative weights".into());
                }
                let mass = |x: f64| -> f64 { values.iter().zip(weights).filter(|(v, _)| (**v - x).abs() <= 1e-12).map(|(_, p)| p).sum() };
                if values.iter().any(|&v| (mass(v) - mass(-v)).abs() > 1e-12) {
                    return bad("point masses must be symmetric about zero".into());
                }
            }
        }
        let total = self.expect(|_| 1.0, &[])?;
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::Domain(format!("distribution mass is {total}, not 1")));
        }
        Ok(())
    }

    pub fn variance(&self) -> Result<f64> {
        self.expect(|w| w * w, &[])
    }

    /// `E[P_eta(w)^2]`.
    pub fn projected_second_moment(&self, eta: f64) -> Result<f64> {
        self.expect(|w| sat(w, eta).powi(2), &[eta])
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Uniform { eta_max } => rng.random_range(-eta_max..=eta_max),
            Self::TruncatedGaussian { sigma, eta_max } => {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                loop {
                    let w: f64 = normal.sample(rng);
                    if w.abs() <= eta_max {
                        return w;
                    }
                }
            }
            Self::PointMassAugmented { sigma, eta_max } => {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                sat(normal.sample(rng), eta_max)
            }
            Self::PointMassList { ref values, ref weights } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (v, p) in values.iter().zip(weights) {
                    if u < *p {
                        return *v;
                    }
                    u -= p;
                }
                *values.last().unwrap()
            }
        }
    }
}

/// `alpha_ij = E[d_i(w) d_j(w)]` with `d_i = P_{eta_i} - P_{eta_{i-1}}` on scalar `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaMoments {
    pub radii: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

impl AlphaMoments {
    /// Wraps a user-supplied matrix, checking symmetry and shape.
    pub fn from_matrix(radii: Vec<f64>, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != radii.len() {
            return Err(Error::Dimension(format!("alpha is {}x{} for {} zones", matrix.nrows(), matrix.ncols(), radii.len())));
        }
        Ok(Self { radii, matrix })
    }

    pub fn zones(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn total(&self) -> f64 {
        self.matrix.sum()
    }
}

fn zone_piece(w: f64, lo: f64, hi: f64) -> f64 {
    sat(w, hi) - sat(w, lo)
}

pub fn alpha_moments(dist: &DisturbanceModel, radii: &[f64]) -> Result<AlphaMoments> {
    dist.validate()?;
    check_radii(radii)?;
    let eta_max = dist.eta_max();
    let top = *radii.last().unwrap();
    if top > eta_max * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("eta_N = {top} exceeds the support bound {eta_max}")));
    }
    let n = radii.len();
    let lower = |i: usize| if i == 0 { 0.0 } else { radii[i - 1] };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let (li, hi) = (lower(i), radii[i]);
            let (lj, hj) = (lower(j), radii[j]);
            let v = if hi == li || hj == lj { 0.0 } else { dist.expect(|w| zone_piece(w, li, hi) * zone_piece(w, lj, hj), radii)? };
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(AlphaMoments { radii: radii.to_vec(), matrix: m })
}

/// `Sigma_w = alpha ⊗ I_n` and its symmetric square root.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaW {
    pub sigma: DMatrix<f64>,
    pub sqrt: DMatrix<f64>,
}

pub fn alpha_sqrt(alpha: &AlphaMoments) -> Result<DMatrix<f64>> {
    let min_eig = min_sym_eigenvalue(&alpha.matrix);
    if min_eig < -PSD_TOL {
        return Err(Error::Domain(format!("alpha has eigenvalue {min_eig:.3e} below -1e-10")));
    }
    sym_sqrt(&alpha.matrix, PSD_TOL)
}

pub fn build_sigma_w(alpha: &AlphaMoments, n: usize) -> Result<SigmaW> {
    let root = alpha_sqrt(alpha)?;
    let eye = DMatrix::<f64>::identity(n, n);
    Ok(SigmaW { sigma: alpha.matrix.kronecker(&eye), sqrt: root.kronecker(&eye) })
}
