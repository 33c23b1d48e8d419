//! Sparse LDLᵀ factorization of quasi-definite matrices with an AMD fill-reducing ordering.
//!
//! Follows the elimination-tree algorithm of QDLDL: a symbolic pass computes the
//! tree and column counts once, and numeric refactorizations reuse it.

use super::sparse::CscMatrix;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    // Permuted upper triangle and the map from input positions into it.
    pattern: CscMatrix,
    input_to_perm: Vec<usize>,
    etree: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
}

impl LdlFactor {
    /// Factors a symmetric matrix given by its upper triangle (diagonal included).
    pub fn new(upper: &CscMatrix) -> Result<Self> {
        let n = upper.ncols;
        if upper.nrows != n {
            return Err(Error::Dimension("LDL needs a square matrix".into()));
        }
        let perm = ordering(upper)?;
        let mut pinv = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            pinv[p] = k;
        }
        let (pattern, input_to_perm) = permute_upper(upper, &pinv);
        let (etree, lnz) = elimination_tree(&pattern)?;
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let mut f = Self {
            n,
            perm,
            pattern,
            input_to_perm,
            etree,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
        };
        f.numeric()?;
        Ok(f)
    }

    /// Refactors with new values on the original sparsity pattern.
    pub fn refactor(&mut self, upper_values: &[f64]) -> Result<()> {
        if upper_values.len() != self.input_to_perm.len() {
            return Err(Error::Dimension("refactor pattern changed".into()));
        }
        for (k, &v) in upper_values.iter().enumerate() {
            self.pattern.values[self.input_to_perm[k]] = v;
        }
        self.numeric()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of positive pivots.
    pub fn positive_pivots(&self) -> usize {
        self.d.iter().filter(|v| **v > 0.0).count()
    }

    fn numeric(&mut self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            return Ok(());
        }
        let (ap, ai, ax) = (&self.pattern.colptr, &self.pattern.rowind, &self.pattern.values);
        let mut y_markers = vec![false; n];
        let mut y_vals = vec![0.0; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();

        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in ap[k]..ap[k + 1] {
                let bidx = ai[p];
                if bidx == k {
                    self.d[k] = ax[p];
                    continue;
                }
                y_vals[bidx] = ax[p];
                let mut next = bidx;
                if !y_markers[next] {
                    y_markers[next] = true;
                    elim[0] = next;
                    let mut nnz_e = 1;
                    next = self.etree[bidx];
                    while next != NONE && next < k {
                        if y_markers[next] {
                            break;
                        }
                        y_markers[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..tmp {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                self.lx[tmp] = yc * self.dinv[c];
                self.d[k] -= yc * self.lx[tmp];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_markers[c] = false;
            }
            if self.d[k] == 0.0 || !self.d[k].is_finite() {
                return Err(Error::Numerical(format!("zero or non-finite pivot at step {k}")));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        Ok(())
    }

    /// Solves `K x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

fn ordering(upper: &CscMatrix) -> Result<Vec<usize>> {
    let n = upper.ncols;
    if n == 0 {
        return Ok(Vec::new());
    }
    // AMD wants the full symmetric pattern with sorted rows.
    let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * upper.nnz());
    for (r, c, _) in upper.triplets() {
        trips.push((r, c, 1.0));
        if r != c {
            trips.push((c, r, 1.0));
        }
    }
    let full = CscMatrix::from_triplets(n, n, &trips);
    let control = amd::Control::default();
    let (p, _, _) = amd::order::<usize>(n, &full.colptr, &full.rowind, &control)
        .map_err(|s| Error::Numerical(format!("AMD ordering failed: {s:?}")))?;
    Ok(p)
}

fn permute_upper(upper: &CscMatrix, pinv: &[usize]) -> (CscMatrix, Vec<usize>) {
    let n = upper.ncols;
    let mut counts = vec![0usize; n + 1];
    for c in 0..n {
        for p in upper.colptr[c]..upper.colptr[c + 1] {
            let (i, j) = (pinv[upper.rowind[p]], pinv[c]);
            counts[i.max(j) + 1] += 1;
        }
    }
    for c in 0..n {
        counts[c + 1] += counts[c];
    }
    let colptr = counts.clone();
    let mut next = counts;
    let nnz = upper.nnz();
    let mut rowind = vec![0usize; nnz];
    let mut values = vec![0.0; nnz];
    let mut map = vec![0usize; nnz];
    for c in 0..n {
        for p in upper.colptr[c]..upper.colptr[c + 1] {
            let (i, j) = (pinv[upper.rowind[p]], pinv[c]);
            let col = i.max(j);
            let dst = next[col];
            next[col] += 1;
            rowind[dst] = i.min(j);
            values[dst] = upper.values[p];
            map[p] = dst;
        }
    }
    (CscMatrix { nrows: n, ncols: n, colptr, rowind, values }, map)
}

fn elimination_tree(a: &CscMatrix) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = a.ncols;
    let mut work = vec![NONE; n];
    let mut lnz = vec![0usize; n];
    let mut etree = vec![NONE; n];
    for j in 0..n {
        work[j] = j;
        for p in a.colptr[j]..a.colptr[j + 1] {
            let mut i = a.rowind[p];
            if i > j {
                return Err(Error::Numerical("LDL input is not upper triangular".into()));
            }
            while work[i] != j {
                if etree[i] == NONE {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }
    Ok((etree, lnz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn quasi_definite(n1: usize, n2: usize, vals: &[f64]) -> DMatrix<f64> {
        let mut it = vals.iter().cycle();
        let g = DMatrix::from_fn(n1, n1, |_, _| *it.next().unwrap());
        let p = &g * g.transpose() + DMatrix::identity(n1, n1) * 0.1;
        let a = DMatrix::from_fn(n2, n1, |_, _| {
            let v = *it.next().unwrap();
            if v.abs() < 0.5 {
                0.0
            } else {
                v
            }
        });
        let mut k = DMatrix::zeros(n1 + n2, n1 + n2);
        k.view_mut((0, 0), (n1, n1)).copy_from(&p);
        k.view_mut((n1, 0), (n2, n1)).copy_from(&a);
        k.view_mut((0, n1), (n1, n2)).copy_from(&a.transpose());
        for i in 0..n2 {
            k[(n1 + i, n1 + i)] = -0.5 - 0.1 * i as f64;
        }
        k
    }

    #[test]
    fn diagonal_solve() {
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -4.0, 8.0]));
        let f = LdlFactor::new(&CscMatrix::from_dense(&k).upper_triangle()).unwrap();
        let mut b = vec![2.0, 4.0, 8.0];
        f.solve(&mut b);
        assert_eq!(b, vec![1.0, -1.0, 1.0]);
        assert_eq!(f.positive_pivots(), 2);
    }

    #[test]
    fn larger_sparse_system() {
        let (n1, n2) = (120usize, 150usize);
        let mut state = 12345u64;
        let mut r = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64) / (1u64 << 31) as f64 - 0.5
        };
        let mut k = DMatrix::zeros(n1 + n2, n1 + n2);
        for i in 0..n1 {
            k[(i, i)] = 1e-6 + if i % 3 == 0 { r().abs() } else { 0.0 };
        }
        for i in 0..n2 {
            for _ in 0..3 {
                let j = ((r() + 0.5) * n1 as f64) as usize % n1;
                let v = r();
                k[(n1 + i, j)] += v;
                k[(j, n1 + i)] += v;
            }
            k[(n1 + i, n1 + i)] = -1.0 / (0.1 + r().abs());
        }
        let f = LdlFactor::new(&CscMatrix::from_dense(&k).upper_triangle()).unwrap();
        let b: Vec<f64> = (0..n1 + n2).map(|_| r()).collect();
        let mut x = b.clone();
        f.solve(&mut x);
        let res = &k * DVector::from_vec(x) - DVector::from_vec(b);
        assert!(res.amax() < 1e-6);
    }

    proptest! {
        #[test]
        fn solves_quasi_definite(vals in prop::collection::vec(-1.0f64..1.0, 40), n1 in 1usize..6, n2 in 0usize..5,
                                 rhs in prop::collection::vec(-1.0f64..1.0, 11)) {
            let k = quasi_definite(n1, n2, &vals);
            let mut f = LdlFactor::new(&CscMatrix::from_dense(&k).upper_triangle()).unwrap();
            prop_assert_eq!(f.positive_pivots(), n1);
            let b: Vec<f64> = rhs[..n1 + n2].to_vec();
            let mut x = b.clone();
            f.solve(&mut x);
            let r = &k * DVector::from_vec(x) - DVector::from_vec(b.clone());
            prop_assert!(r.amax() < 1e-9);

            let k2 = &k * 2.0;
            let up = CscMatrix::from_dense(&k).upper_triangle();
            let vals2: Vec<f64> = up.values.iter().map(|v| v * 2.0).collect();
            f.refactor(&vals2).unwrap();
            let mut x2 = b.clone();
            f.solve(&mut x2);
            let r2 = k2 * DVector::from_vec(x2) - DVector::from_vec(b);
            prop_assert!(r2.amax() < 1e-9);
        }
    }
}
