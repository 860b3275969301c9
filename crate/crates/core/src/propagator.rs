//! Block-diagonal spectral representation of a Hermitian generator.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::linalg::herm_eigen;
use crate::sparse::CsrMatrix;

struct Block {
    idx: Vec<usize>,
    vals: DVector<f64>,
    vecs: DMatrix<Complex64>,
}

/// Eigen-decomposition of `G` computed per connected component of its
/// sparsity graph.
pub struct Propagator {
    dim: usize,
    blocks: Vec<Block>,
}

impl Propagator {
    pub fn new(g: &CsrMatrix) -> Self {
        let blocks = g
            .components()
            .into_iter()
            .map(|idx| {
                let (vals, vecs) = herm_eigen(&g.block(&idx));
                Block { idx, vals, vecs }
            })
            .collect();
        Self { dim: g.dim(), blocks }
    }

    /// `exp(-i t G) v`
    pub fn apply(&self, t: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
        assert_eq!(v.len(), self.dim);
        let mut out = DVector::zeros(self.dim);
        for b in &self.blocks {
            let sub = DVector::from_iterator(b.idx.len(), b.idx.iter().map(|&i| v[i]));
            if sub.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let mut c = b.vecs.adjoint() * sub;
            for (k, z) in c.iter_mut().enumerate() {
                *z *= Complex64::new(0.0, -t * b.vals[k]).exp();
            }
            let r = &b.vecs * c;
            for (p, &i) in b.idx.iter().enumerate() {
                out[i] = r[p];
            }
        }
        out
    }

    /// `exp(isG) H exp(-isG) v`
    pub fn conjugated(&self, h: &CsrMatrix, s: f64, v: &DVector<Complex64>) -> DVector<Complex64> {
        let phi = self.apply(s, v);
        self.apply(-s, &h.apply(&phi))
    }
}

/// Adaptive Simpson quadrature of a vector-valued integrand on [a, b],
/// controlled on the Euclidean norm of the error estimate.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> DVector<Complex64>
where
    F: Fn(f64) -> DVector<Complex64>,
{
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = simpson(a, b, &fa, &fm, &fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

fn simpson(
    a: f64,
    b: f64,
    fa: &DVector<Complex64>,
    fm: &DVector<Complex64>,
    fb: &DVector<Complex64>,
) -> DVector<Complex64> {
    (fa + fm * Complex64::new(4.0, 0.0) + fb) * Complex64::new((b - a) / 6.0, 0.0)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: DVector<Complex64>,
    fm: DVector<Complex64>,
    fb: DVector<Complex64>,
    whole: DVector<Complex64>,
    tol: f64,
    depth: u32,
) -> DVector<Complex64>
where
    F: Fn(f64) -> DVector<Complex64>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, &fa, &flm, &fm);
    let right = simpson(m, b, &fm, &frm, &fb);
    let delta = &left + &right - &whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / Complex64::new(15.0, 0.0);
    }
    recurse(f, a, m, fa, flm, fm.clone(), left, tol / 2.0, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_oscillation() {
        let f = |s: f64| DVector::from_element(1, Complex64::new(0.0, 3.0 * s).exp());
        let v = adaptive_simpson(&f, 0.0, 1.0, 1e-12);
        let exact = (Complex64::new(0.0, 3.0).exp() - 1.0) / Complex64::new(0.0, 3.0);
        assert!((v[0] - exact).norm() < 1e-11);
    }
}
