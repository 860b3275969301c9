//! Adjoint-representation matrices for SU(2) rotations `U = exp(-i θ·J)`.
//!
//! `U† J_k U = Σ_l O3[k][l] J_l`; `O3_tilde = ∫₀¹ O3(sθ) ds`; `O6` is the
//! induced action on the quadratic monomials
//! (J1², J2², J3², {J2,J3}, {J1,J3}, {J1,J2}).

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::estimation::Moments;

/// Below this angle sin θ/θ switches to its Taylor expansion.
const SERIES_CUTOFF: f64 = 1e-6;
/// Below this angle (θ − sin θ)/θ³ is summed as a series.
const CUBIC_SERIES_CUTOFF: f64 = 0.5;

pub const SU2_CANONICAL: [&str; 9] = [
    "Jx", "Jy", "Jz", "Jx^2", "Jy^2", "Jz^2", "{Jy,Jz}", "{Jx,Jz}", "{Jx,Jy}",
];

fn norm(t: &[f64; 3]) -> f64 {
    (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt()
}

/// sin θ/θ, (1 − cos θ)/θ², (θ − sin θ)/θ³
fn factors(th: f64) -> (f64, f64, f64) {
    let t2 = th * th;
    let sinc = if th < SERIES_CUTOFF {
        1.0 - t2 / 6.0
    } else {
        th.sin() / th
    };
    let vers = if th < SERIES_CUTOFF {
        0.5 - t2 / 24.0
    } else {
        let h = (0.5 * th).sin();
        2.0 * h * h / t2
    };
    let cubic = if th < CUBIC_SERIES_CUTOFF {
        // Σ_k (−θ²)^k / (2k+3)!
        let mut term = 1.0 / 6.0;
        let mut sum = term;
        for k in 1..12 {
            term *= -t2 / ((2 * k + 2) as f64 * (2 * k + 3) as f64);
            sum += term;
        }
        sum
    } else {
        (th - th.sin()) / (t2 * th)
    };
    (sinc, vers, cubic)
}

/// Builds `diag·δ_kl + θ_kθ_l·sym + ε_klm θ_m·skew` with the rotation sign pattern.
fn rotation_like(t: &[f64; 3], diag: f64, sym: f64, skew: f64) -> Matrix3<f64> {
    let [a, b, c] = *t;
    Matrix3::new(
        diag + a * a * sym,
        a * b * sym - c * skew,
        a * c * sym + b * skew,
        a * b * sym + c * skew,
        diag + b * b * sym,
        b * c * sym - a * skew,
        a * c * sym - b * skew,
        b * c * sym + a * skew,
        diag + c * c * sym,
    )
}

pub fn o3(theta: [f64; 3]) -> Matrix3<f64> {
    let th = norm(&theta);
    let (sinc, vers, _) = factors(th);
    rotation_like(&theta, th.cos(), vers, sinc)
}

pub fn o3_tilde(theta: [f64; 3]) -> Matrix3<f64> {
    let th = norm(&theta);
    let (sinc, vers, cubic) = factors(th);
    rotation_like(&theta, sinc, cubic, vers)
}

/// The 6×6 matrix acting on the coordinates (Q11, Q22, Q33, Q23, Q13, Q12)
/// of a symmetric matrix Q under Q ↦ O3 Q O3ᵀ.
pub fn o6(theta: [f64; 3]) -> DMatrix<f64> {
    o6_from(&o3(theta))
}

fn o6_from(o: &Matrix3<f64>) -> DMatrix<f64> {
    let e = |i: usize, j: usize| o[(i - 1, j - 1)];
    let row = |i: usize| {
        [
            e(i, 1).powi(2),
            e(i, 2).powi(2),
            e(i, 3).powi(2),
            2.0 * e(i, 2) * e(i, 3),
            2.0 * e(i, 1) * e(i, 3),
            2.0 * e(i, 1) * e(i, 2),
        ]
    };
    let mixed = |i: usize, k: usize| {
        [
            e(i, 1) * e(k, 1),
            e(i, 2) * e(k, 2),
            e(i, 3) * e(k, 3),
            e(i, 2) * e(k, 3) + e(k, 2) * e(i, 3),
            e(i, 1) * e(k, 3) + e(k, 1) * e(i, 3),
            e(i, 1) * e(k, 2) + e(k, 1) * e(i, 2),
        ]
    };
    let rows = [row(1), row(2), row(3), mixed(2, 3), mixed(3, 1), mixed(1, 2)];
    DMatrix::from_fn(6, 6, |r, c| rows[r][c])
}

/// Action of the rotation on the operator vector of quadratic monomials,
/// where the anticommutators carry twice the weight of an off-diagonal
/// symmetric-matrix coordinate: D·O6·D⁻¹ with D = diag(1,1,1,2,2,2).
pub fn o6_operator(theta: [f64; 3]) -> DMatrix<f64> {
    let mut m = o6(theta);
    for r in 0..6 {
        for c in 0..6 {
            let dr = if r < 3 { 1.0 } else { 2.0 };
            let dc = if c < 3 { 1.0 } else { 2.0 };
            m[(r, c)] *= dr / dc;
        }
    }
    m
}

/// Symmetric-matrix coordinates (Q11, Q22, Q33, Q23, Q13, Q12).
pub fn sym_coords(q: &Matrix3<f64>) -> [f64; 6] {
    [q[(0, 0)], q[(1, 1)], q[(2, 2)], q[(1, 2)], q[(0, 2)], q[(0, 1)]]
}

#[derive(Debug, Clone, Serialize)]
pub struct AdjointTransform {
    pub theta: [f64; 3],
    pub o3: Matrix3<f64>,
    pub o3_tilde: Matrix3<f64>,
    pub o6: DMatrix<f64>,
}

impl AdjointTransform {
    pub fn new(theta: [f64; 3]) -> Self {
        Self {
            theta,
            o3: o3(theta),
            o3_tilde: o3_tilde(theta),
            o6: o6(theta),
        }
    }

    /// O3 ⊕ D·O6·D⁻¹ acting on the canonical nine-vector.
    pub fn block_transform(&self) -> DMatrix<f64> {
        let mut t = DMatrix::zeros(9, 9);
        t.view_mut((0, 0), (3, 3)).copy_from(&self.o3);
        t.view_mut((3, 3), (6, 6)).copy_from(&o6_operator(self.theta));
        t
    }

    /// Rotates a unit axis: O3ᵀ applied to a parameter direction.
    pub fn rotate(&self, v: Vector3<f64>) -> Vector3<f64> {
        self.o3 * v
    }
}

/// Moments of the canonical su(2) nine-vector on `U(θ)|ψ⟩`, obtained from the
/// moments on |ψ⟩ without evolving the state.
pub fn heisenberg_transform(moments: &Moments, theta: [f64; 3]) -> Result<Moments> {
    if moments
        .labels
        .iter()
        .map(String::as_str)
        .ne(SU2_CANONICAL.iter().copied())
    {
        return Err(invalid(format!(
            "heisenberg transform needs the canonical su(2) ordering {:?}, got {:?}",
            SU2_CANONICAL, moments.labels
        )));
    }
    let t = AdjointTransform::new(theta).block_transform();
    Ok(Moments {
        labels: moments.labels.clone(),
        mean: &t * &moments.mean,
        gamma: &t * &moments.gamma * t.transpose(),
        omega: &t * &moments.omega * t.transpose(),
    })
}
