//! Compressed-row complex matrices.
//!
//! Every ladder-operator polynomial used here has a handful of nonzeros per
//! row, so operators are stored in CSR form and densified only on request.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl CsrMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn diagonal(d: &[Complex64]) -> Self {
        let dim = d.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(dim);
        let mut vals = Vec::with_capacity(dim);
        row_ptr.push(0);
        for (i, &v) in d.iter().enumerate() {
            if v != Complex64::new(0.0, 0.0) {
                cols.push(i);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and exact
    /// zeros removed.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, Complex64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triplets.len());
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r},{c}) out of range for dim {dim}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), cols.last()) {
                if lr == r && lc == c {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            cols.push(c);
            vals.push(v);
        }
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        let mut k = 0;
        for r in 0..dim {
            while k < rows.len() && rows[k] == r {
                if vals[k] != Complex64::new(0.0, 0.0) {
                    out_cols.push(cols[k]);
                    out_vals.push(vals[k]);
                }
                k += 1;
            }
            row_ptr[r + 1] = out_cols.len();
        }
        Self {
            dim,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[a..b].binary_search(&j) {
            Ok(k) => self.vals[a + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn apply(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(v.len(), self.dim);
        DVector::from_fn(self.dim, |i, _| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, a) in self.row(i) {
                acc += a * v[j];
            }
            acc
        })
    }

    pub fn adjoint(&self) -> Self {
        let t = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.dim, t)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        if s == Complex64::new(0.0, 0.0) {
            return Self::zeros(self.dim);
        }
        out
    }

    /// `a * self + b * other`
    pub fn axpby(&self, a: Complex64, other: &Self, b: Complex64) -> Self {
        assert_eq!(self.dim, other.dim);
        let t = self
            .triplets()
            .map(|(i, j, v)| (i, j, a * v))
            .chain(other.triplets().map(|(i, j, v)| (i, j, b * v)))
            .collect();
        Self::from_triplets(self.dim, t)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let dim = self.dim;
        let zero = Complex64::new(0.0, 0.0);
        let mut acc = vec![zero; dim];
        let mut touched = vec![false; dim];
        let mut idx: Vec<usize> = Vec::new();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        idx.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            idx.sort_unstable();
            for &j in &idx {
                if acc[j] != zero {
                    cols.push(j);
                    vals.push(acc[j]);
                }
                acc[j] = zero;
                touched[j] = false;
            }
            idx.clear();
            row_ptr.push(cols.len());
        }
        Self {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Upper bound on the spectral norm (max absolute row sum).
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).map(|(_, v)| v.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// max |M - M†|
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, j, v) in self.triplets() {
            worst = worst.max((v - self.get(j, i).conj()).norm());
        }
        worst
    }

    /// Connected components of the graph whose edges are the nonzero entries.
    /// Each component is returned as a sorted index list; components are
    /// ordered by their smallest index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..self.dim).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for (i, j, _) in self.triplets() {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for i in 0..self.dim {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push(i);
        }
        groups.into_values().collect()
    }

    /// Dense restriction to the index set `idx` (rows and columns).
    pub fn block(&self, idx: &[usize]) -> DMatrix<Complex64> {
        let mut pos = std::collections::HashMap::with_capacity(idx.len());
        for (p, &i) in idx.iter().enumerate() {
            pos.insert(i, p);
        }
        let mut m = DMatrix::zeros(idx.len(), idx.len());
        for (p, &i) in idx.iter().enumerate() {
            for (j, v) in self.row(i) {
                if let Some(&q) = pos.get(&j) {
                    m[(p, q)] = v;
                }
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matmul_matches_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            vec![
                (0, 1, c(1.0, 2.0)),
                (1, 2, c(-0.5, 0.0)),
                (2, 0, c(0.0, 1.0)),
                (0, 1, c(1.0, 0.0)),
            ],
        );
        let b = CsrMatrix::from_triplets(3, vec![(1, 1, c(2.0, 0.0)), (2, 0, c(1.0, -1.0)), (0, 2, c(3.0, 0.0))]);
        let dense = a.to_dense() * b.to_dense();
        let sparse = a.matmul(&b).to_dense();
        assert!((dense - sparse).norm() < 1e-14);
        assert_eq!(a.get(0, 1), c(2.0, 2.0));
    }

    #[test]
    fn adjoint_and_components() {
        let a = CsrMatrix::from_triplets(4, vec![(0, 1, c(1.0, 1.0)), (3, 2, c(0.0, 2.0))]);
        let h = a.axpby(c(1.0, 0.0), &a.adjoint(), c(1.0, 0.0));
        assert!(h.hermitian_defect() < 1e-15);
        assert!(a.hermitian_defect() > 1.0);
        assert_eq!(h.components(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn cancellation_drops_entries() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 1, c(1.0, 0.0))]);
        let z = a.axpby(c(1.0, 0.0), &a, c(-1.0, 0.0));
        assert_eq!(z.nnz(), 0);
    }
}
