//! Compressed sparse column storage with the handful of kernels the solver needs.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, colptr: vec![0; ncols + 1], rowind: Vec::new(), values: Vec::new() }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates and dropping exact zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = trips.to_vec();
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowind = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                rowind.push(r);
                values.push(v);
                colptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        let mut m = Self { nrows, ncols, colptr, rowind, values };
        m.drop_zeros();
        m
    }

    fn drop_zeros(&mut self) {
        if self.values.iter().all(|v| *v != 0.0) {
            return;
        }
        let mut colptr = vec![0usize; self.ncols + 1];
        let mut rowind = Vec::with_capacity(self.rowind.len());
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                if self.values[p] != 0.0 {
                    rowind.push(self.rowind[p]);
                    values.push(self.values[p]);
                }
            }
            colptr[c + 1] = rowind.len();
        }
        self.colptr = colptr;
        self.rowind = rowind;
        self.values = values;
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut trips = Vec::new();
        for j in 0..m.ncols() {
            for i in 0..m.nrows() {
                if m[(i, j)] != 0.0 {
                    trips.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trips)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols);
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                out[(self.rowind[p], c)] += self.values[p];
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                out.push((self.rowind[p], c, self.values[p]));
            }
        }
        out
    }

    /// `y += alpha * A x`.
    pub fn mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowind[p]] += self.values[p] * xc;
            }
        }
    }

    /// `y += alpha * A^T x`.
    pub fn tr_mul_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[p] * x[self.rowind[p]];
            }
            y[c] += alpha * acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_add(1.0, x, &mut y);
        y
    }

    pub fn tr_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_mul_add(1.0, x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let trips: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &trips)
    }

    pub fn vstack(top: &Self, bottom: &Self) -> Self {
        assert_eq!(top.ncols, bottom.ncols, "vstack column mismatch");
        let mut trips = top.triplets();
        trips.extend(bottom.triplets().into_iter().map(|(r, c, v)| (r + top.nrows, c, v)));
        Self::from_triplets(top.nrows + bottom.nrows, top.ncols, &trips)
    }

    /// `diag(dr) * A * diag(dc)` in place.
    pub fn scale(&mut self, dr: &[f64], dc: &[f64]) {
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                self.values[p] *= dr[self.rowind[p]] * dc[c];
            }
        }
    }

    pub fn col_inf_norms(&self) -> Vec<f64> {
        (0..self.ncols).map(|c| self.values[self.colptr[c]..self.colptr[c + 1]].iter().fold(0.0f64, |a, v| a.max(v.abs()))).collect()
    }

    pub fn row_inf_norms(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.nrows];
        for c in 0..self.ncols {
            for p in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowind[p];
                out[r] = out[r].max(self.values[p].abs());
            }
        }
        out
    }

    /// Entries with `row <= col`.
    pub fn upper_triangle(&self) -> Self {
        let trips: Vec<_> = self.triplets().into_iter().filter(|(r, c, _)| r <= c).collect();
        Self::from_triplets(self.nrows, self.ncols, &trips)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.nrows != self.ncols {
            return false;
        }
        let t = self.transpose();
        let mut diff: Vec<(usize, usize, f64)> = self.triplets();
        diff.extend(t.triplets().into_iter().map(|(r, c, v)| (r, c, -v)));
        let d = Self::from_triplets(self.nrows, self.ncols, &diff);
        d.values.iter().all(|v| v.abs() <= tol)
    }

    /// Selects rows by index, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.nrows];
        for (new, &old) in rows.iter().enumerate() {
            map[old] = new;
        }
        let trips: Vec<_> = self.triplets().into_iter().filter(|(r, _, _)| map[*r] != usize::MAX).map(|(r, c, v)| (map[r], c, v)).collect();
        Self::from_triplets(rows.len(), self.ncols, &trips)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_round_trip_and_products() {
        let d = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, 0.0, -3.0, 0.0]);
        let s = CscMatrix::from_dense(&d);
        assert_eq!(s.nnz(), 3);
        assert_eq!(s.to_dense(), d);
        assert_eq!(s.mul(&[1.0, 1.0, 1.0]), vec![3.0, -3.0]);
        assert_eq!(s.tr_mul(&[1.0, 2.0]), vec![1.0, -6.0, 2.0]);
        assert_eq!(s.transpose().to_dense(), d.transpose());
    }

    #[test]
    fn duplicates_sum_and_cancel() {
        let s = CscMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 1, 1.0), (1, 1, -1.0)]);
        assert_eq!(s.nnz(), 1);
        assert_eq!(s.to_dense()[(0, 0)], 3.0);
    }

    #[test]
    fn stacking_and_selection() {
        let a = CscMatrix::from_dense(&DMatrix::from_row_slice(1, 2, &[1.0, 2.0]));
        let b = CscMatrix::from_dense(&DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
        let s = CscMatrix::vstack(&a, &b);
        assert_eq!(s.to_dense(), DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(s.select_rows(&[1]).to_dense(), DMatrix::from_row_slice(1, 2, &[3.0, 4.0]));
    }
}
