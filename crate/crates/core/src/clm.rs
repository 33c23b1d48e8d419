//! Plants, FIR closed-loop maps and blends of them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{dim_check, Error, Result};
use crate::linalg::{all_finite, matrix_to_rows, max_abs, rows_to_matrix};
use crate::projection::{check_radii, zone_decompose_into, ProjectionKind};

/// `x_t = A x_{t-1} + B u_{t-1} + w_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        dim_check(a.is_square() && a.nrows() >= 1, || format!("A must be square, got {}x{}", a.nrows(), a.ncols()))?;
        dim_check(b.nrows() == a.nrows() && b.ncols() >= 1, || {
            format!("B must be {}xm with m >= 1, got {}x{}", a.nrows(), b.nrows(), b.ncols())
        })?;
        if !all_finite(&a) || !all_finite(&b) {
            return Err(Error::Domain("plant matrices must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + w
    }
}

/// Which terminal condition closes the FIR recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Closure {
    /// `A R_T + B M_T = 0`.
    #[default]
    General,
    /// `R_T = 0` and `M_T = 0`.
    Strict,
}

/// Linear FIR closed-loop map `{R_k, M_k}`, stored with `r[k-1] = R_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct FirClm {
    r: Vec<DMatrix<f64>>,
    m: Vec<DMatrix<f64>>,
}

impl FirClm {
    pub fn new(r: Vec<DMatrix<f64>>, m: Vec<DMatrix<f64>>) -> Result<Self> {
        dim_check(!r.is_empty() && r.len() == m.len(), || {
            format!("need T >= 1 taps with equal counts, got {} R and {} M", r.len(), m.len())
        })?;
        let n = r[0].nrows();
        let mm = m[0].nrows();
        for (k, (rk, mk)) in r.iter().zip(&m).enumerate() {
            dim_check(rk.nrows() == n && rk.ncols() == n, || format!("R_{} is {}x{}, expected {n}x{n}", k + 1, rk.nrows(), rk.ncols()))?;
            dim_check(mk.nrows() == mm && mk.ncols() == n, || format!("M_{} is {}x{}, expected {mm}x{n}", k + 1, mk.nrows(), mk.ncols()))?;
        }
        if !r.iter().chain(&m).all(all_finite) {
            return Err(Error::Domain("CLM entries must be finite".into()));
        }
        Ok(Self { r, m })
    }

    pub fn horizon(&self) -> usize {
        self.r.len()
    }

    pub fn n(&self) -> usize {
        self.r[0].nrows()
    }

    pub fn m_dim(&self) -> usize {
        self.m[0].nrows()
    }

    /// `R_k`, 1-based.
    pub fn r(&self, k: usize) -> &DMatrix<f64> {
        &self.r[k - 1]
    }

    /// `M_k`, 1-based.
    pub fn m(&self, k: usize) -> &DMatrix<f64> {
        &self.m[k - 1]
    }

    pub fn r_taps(&self) -> &[DMatrix<f64>] {
        &self.r
    }

    pub fn m_taps(&self) -> &[DMatrix<f64>] {
        &self.m
    }

    /// `[R_T, ..., R_1]`.
    pub fn r_concat(&self) -> DMatrix<f64> {
        concat_rev(&self.r)
    }

    /// `[M_T, ..., M_1]`.
    pub fn m_concat(&self) -> DMatrix<f64> {
        concat_rev(&self.m)
    }
}

fn concat_rev(taps: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = taps[0].nrows();
    let cols = taps[0].ncols();
    let t = taps.len();
    let mut out = DMatrix::zeros(rows, cols * t);
    for (k, tap) in taps.iter().enumerate() {
        out.view_mut((0, (t - 1 - k) * cols), (rows, cols)).copy_from(tap);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub identity: f64,
    /// `recursion[k-1]` is the max residual of `R_{k+1} - A R_k - B M_k`.
    pub recursion: Vec<f64>,
    pub closure: f64,
    pub tol: f64,
    pub passed: bool,
}

impl ValidationReport {
    pub fn max_residual(&self) -> f64 {
        self.recursion.iter().cloned().fold(self.identity.max(self.closure), f64::max)
    }
}

pub fn validate_fir_clm(clm: &FirClm, sys: &LinearSystem, tol: f64, closure: Closure) -> Result<ValidationReport> {
    let (n, m) = (sys.n(), sys.m());
    dim_check(clm.n() == n && clm.m_dim() == m, || format!("CLM is for n={}, m={} but plant has n={n}, m={m}", clm.n(), clm.m_dim()))?;
    let t = clm.horizon();
    let identity = max_abs(&(clm.r(1) - DMatrix::<f64>::identity(n, n)));
    let recursion: Vec<f64> = (1..t).map(|k| max_abs(&(clm.r(k + 1) - sys.a() * clm.r(k) - sys.b() * clm.m(k)))).collect();
    let closure_res = match closure {
        Closure::General => max_abs(&(sys.a() * clm.r(t) + sys.b() * clm.m(t))),
        Closure::Strict => max_abs(clm.r(t)).max(max_abs(clm.m(t))),
    };
    let mut report = ValidationReport { identity, recursion, closure: closure_res, tol, passed: false };
    report.passed = report.max_residual() <= tol;
    Ok(report)
}

fn check_seq(w: &[DVector<f64>], n: usize) -> Result<()> {
    match w.iter().position(|wt| wt.len() != n) {
        Some(t) => Err(Error::Dimension(format!("w_{t} has length {}, expected {n}", w[t].len()))),
        None => Ok(()),
    }
}

/// `x_t = sum_{k=1}^{min(t+1,T)} R_k w_{t+1-k}` and likewise for `u`.
pub fn clm_convolve(clm: &FirClm, w: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    check_seq(w, clm.n())?;
    let t_h = clm.horizon();
    let mut xs = Vec::with_capacity(w.len());
    let mut us = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let mut x = DVector::zeros(clm.n());
        let mut u = DVector::zeros(clm.m_dim());
        for k in 1..=t_h.min(t + 1) {
            let wk = &w[t + 1 - k];
            x.gemv(1.0, clm.r(k), wk, 1.0);
            u.gemv(1.0, clm.m(k), wk, 1.0);
        }
        xs.push(x);
        us.push(u);
    }
    Ok((xs, us))
}

/// `N` linear zones blended through a projection family.
#[derive(Debug, Clone, PartialEq)]
pub struct BlendClm {
    zones: Vec<FirClm>,
    radii: Vec<f64>,
    projection: ProjectionKind,
}

impl BlendClm {
    /// `radii` are `eta_1..eta_N`; `eta_0 = 0` is implicit.
    pub fn new(zones: Vec<FirClm>, radii: Vec<f64>, projection: ProjectionKind) -> Result<Self> {
        dim_check(!zones.is_empty() && zones.len() == radii.len(), || format!("{} zones but {} radii", zones.len(), radii.len()))?;
        check_radii(&radii)?;
        let (n, m, t) = (zones[0].n(), zones[0].m_dim(), zones[0].horizon());
        for (i, z) in zones.iter().enumerate() {
            dim_check(z.n() == n && z.m_dim() == m && z.horizon() == t, || {
                format!("zone {} has (n, m, T) = ({}, {}, {}), expected ({n}, {m}, {t})", i + 1, z.n(), z.m_dim(), z.horizon())
            })?;
        }
        Ok(Self { zones, radii, projection })
    }

    pub fn linear(clm: FirClm, eta: f64) -> Result<Self> {
        Self::new(vec![clm], vec![eta], ProjectionKind::Saturation)
    }

    pub fn zones(&self) -> &[FirClm] {
        &self.zones
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn eta_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    pub fn projection(&self) -> ProjectionKind {
        self.projection
    }

    pub fn n(&self) -> usize {
        self.zones[0].n()
    }

    pub fn m_dim(&self) -> usize {
        self.zones[0].m_dim()
    }

    pub fn horizon(&self) -> usize {
        self.zones[0].horizon()
    }

    pub fn validate(&self, sys: &LinearSystem, tol: f64, closure: Closure) -> Result<Vec<ValidationReport>> {
        self.zones.iter().map(|z| validate_fir_clm(z, sys, tol, closure)).collect()
    }

    /// Zone pieces of one disturbance vector.
    pub fn decompose(&self, w: &DVector<f64>) -> Vec<DVector<f64>> {
        let mut out = vec![DVector::zeros(w.len()); self.radii.len()];
        zone_decompose_into(&self.radii, self.projection, w.as_slice(), &mut out);
        out
    }

    pub fn to_document(&self) -> ClmDocument {
        ClmDocument {
            n: self.n(),
            m: self.m_dim(),
            horizon: self.horizon(),
            projection: self.projection,
            zones: self
                .zones
                .iter()
                .zip(&self.radii)
                .map(|(z, &eta)| ZoneDocument {
                    eta,
                    r: z.r.iter().map(matrix_to_rows).collect(),
                    m: z.m.iter().map(matrix_to_rows).collect(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &ClmDocument) -> Result<Self> {
        let mut zones = Vec::with_capacity(doc.zones.len());
        let mut radii = Vec::with_capacity(doc.zones.len());
        for z in &doc.zones {
            let r = z.r.iter().map(|t| rows_to_matrix(t)).collect::<Result<Vec<_>>>()?;
            let m = z.m.iter().map(|t| rows_to_matrix(t)).collect::<Result<Vec<_>>>()?;
            zones.push(FirClm::new(r, m)?);
            radii.push(z.eta);
        }
        let blend = Self::new(zones, radii, doc.projection)?;
        dim_check(blend.n() == doc.n && blend.m_dim() == doc.m && blend.horizon() == doc.horizon, || {
            format!(
                "document header (n, m, T) = ({}, {}, {}) disagrees with matrices ({}, {}, {})",
                doc.n,
                doc.m,
                doc.horizon,
                blend.n(),
                blend.m_dim(),
                blend.horizon()
            )
        })?;
        Ok(blend)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(&serde_json::from_str(s)?)
    }
}

/// On-disk form of a [`BlendClm`].
///
/// `R` and `M` hold the taps `k = 1..T` in order, each as a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClmDocument {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub zones: Vec<ZoneDocument>,
    pub projection: ProjectionKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneDocument {
    pub eta: f64,
    #[serde(rename = "R")]
    pub r: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<Vec<f64>>>,
}

/// Applies the blend to a disturbance sequence in open loop.
pub fn blend_apply(blend: &BlendClm, w: &[DVector<f64>]) -> Result<(Vec<DVector<f64>>, Vec<DVector<f64>>)> {
    check_seq(w, blend.n())?;
    let pieces: Vec<Vec<DVector<f64>>> = w.iter().map(|wt| blend.decompose(wt)).collect();
    let t_h = blend.horizon();
    let mut xs = Vec::with_capacity(w.len());
    let mut us = Vec::with_capacity(w.len());
    for t in 0..w.len() {
        let mut x = DVector::zeros(blend.n());
        let mut u = DVector::zeros(blend.m_dim());
        for (i, zone) in blend.zones.iter().enumerate() {
            for k in 1..=t_h.min(t + 1) {
                let d = &pieces[t + 1 - k][i];
                x.gemv(1.0, zone.r(k), d, 1.0);
                u.gemv(1.0, zone.m(k), d, 1.0);
            }
        }
        xs.push(x);
        us.push(u);
    }
    Ok((xs, us))
}

/// Induced ∞-norm of a concatenation `[X_T, ..., X_1]`.
pub fn peak_gain(concat: &DMatrix<f64>) -> f64 {
    crate::linalg::inf_norm(concat)
}
