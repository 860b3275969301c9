//! Small dense linear-algebra helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Relative threshold for pseudo-inverses and null-space detection.
pub const REL_TOL: f64 = 1e-10;

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let s = symmetrize(m);
    let e = SymmetricEigen::new(s);
    sort_pairs(e.eigenvalues, e.eigenvectors)
}

/// Eigen-decomposition of a complex Hermitian matrix, eigenvalues ascending.
pub fn herm_eigen(m: &DMatrix<Complex64>) -> (DVector<f64>, DMatrix<Complex64>) {
    let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let e = SymmetricEigen::new(h);
    sort_pairs(e.eigenvalues, e.eigenvectors)
}

fn sort_pairs<T: nalgebra::Scalar + Copy>(vals: DVector<f64>, vecs: DMatrix<T>) -> (DVector<f64>, DMatrix<T>) {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let v = DVector::from_iterator(vals.len(), order.iter().map(|&i| vals[i]));
    let u = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, col| vecs[(r, order[col])]);
    (v, u)
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Pseudo-inverse of a symmetric matrix; eigenvalues with |λ| ≤ tol·max|λ| are
/// treated as zero. Returns the inverse and the effective rank.
pub fn pinv_sym(m: &DMatrix<f64>, rel_tol: f64) -> (DMatrix<f64>, usize) {
    let n = m.nrows();
    if n == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let (vals, vecs) = sym_eigen(m);
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut out = DMatrix::zeros(n, n);
    let mut rank = 0;
    for k in 0..n {
        if scale > 0.0 && vals[k].abs() > rel_tol * scale {
            rank += 1;
            let u = vecs.column(k);
            out += (u * u.transpose()) / vals[k];
        }
    }
    (out, rank)
}

/// Smallest eigenvalue of a symmetric matrix (0 for an empty one).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    sym_eigen(m).0[0]
}

/// Orthonormal basis of the row space of `a` (as rows).
pub fn row_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::zeros(0, a.ncols());
    }
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let smax = svd.singular_values.iter().fold(0.0f64, |x, &s| x.max(s));
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| smax > 0.0 && svd.singular_values[k] > rel_tol * smax)
        .collect();
    DMatrix::from_fn(keep.len(), a.ncols(), |r, col| vt[(keep[r], col)])
}

/// Distance between the row spaces of two matrices: the spectral norm of the
/// difference of their orthogonal projectors. Zero iff the spans agree.
pub fn span_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = row_space(a, 1e-9);
    let qb = row_space(b, 1e-9);
    if qa.nrows() != qb.nrows() {
        return 1.0;
    }
    let pa = qa.transpose() * &qa;
    let pb = qb.transpose() * &qb;
    let d = pa - pb;
    let (vals, _) = sym_eigen(&d);
    vals.iter().fold(0.0f64, |x, v| x.max(v.abs()))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_drops_null_directions() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 2.0, 0.0]));
        let (p, rank) = pinv_sym(&m, REL_TOL);
        assert_eq!(rank, 2);
        assert!((p[(0, 0)] - 0.25).abs() < 1e-15);
        assert!((p[(1, 1)] - 0.5).abs() < 1e-15);
        assert_eq!(p[(2, 2)], 0.0);
    }

    #[test]
    fn span_distance_ignores_invertible_mixing() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 3.0]);
        assert!(span_distance(&a, &(g * &a)) < 1e-12);
        let b = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(span_distance(&a, &b) > 0.1);
    }

    #[test]
    fn herm_eigen_sorted() {
        let i = Complex64::new(0.0, 1.0);
        let m = DMatrix::from_row_slice(2, 2, &[Complex64::new(0.0, 0.0), -i, i, Complex64::new(0.0, 0.0)]);
        let (v, u) = herm_eigen(&m);
        assert!((v[0] + 1.0).abs() < 1e-14 && (v[1] - 1.0).abs() < 1e-14);
        let back = &u * DMatrix::from_diagonal(&v.map(|x| Complex64::new(x, 0.0))) * u.adjoint();
        assert!((back - m).norm() < 1e-13);
    }
}
