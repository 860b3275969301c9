use mk_core::adjoint::*;
use mk_core::estimation::moments;
use mk_core::linalg::max_abs;
use mk_core::operators::{make_su2, with_quadratics, FockBasis};
use mk_core::states::{evolve, make_state, StateSpec, StateVector};
use nalgebra::{DMatrix, DVector, Matrix3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_theta(rng: &mut ChaCha8Rng, max_norm: f64) -> [f64; 3] {
    loop {
        let t = [
            rng.random_range(-max_norm..max_norm),
            rng.random_range(-max_norm..max_norm),
            rng.random_range(-max_norm..max_norm),
        ];
        if (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() <= max_norm {
            return t;
        }
    }
}

fn scaled(t: [f64; 3], s: f64) -> [f64; 3] {
    [t[0] * s, t[1] * s, t[2] * s]
}

/// Composite Simpson rule on [0, 1] with 2000 panels.
fn integrate_o3(theta: [f64; 3]) -> Matrix3<f64> {
    let n = 2000;
    let h = 1.0 / n as f64;
    let mut acc = Matrix3::zeros();
    for k in 0..=n {
        let w = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += o3(scaled(theta, k as f64 * h)) * w;
    }
    acc * (h / 3.0)
}

#[test]
fn o3_is_a_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let o = o3(random_theta(&mut rng, std::f64::consts::PI));
        assert!((o.transpose() * o - Matrix3::identity()).amax() < 1e-14);
        assert!((o.determinant() - 1.0).abs() < 1e-14);
    }
}

#[test]
fn o3_tilde_is_the_average_rotation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let t = random_theta(&mut rng, std::f64::consts::PI);
        assert!((o3_tilde(t) - integrate_o3(t)).amax() < 1e-10);
    }
}

#[test]
fn o3_tilde_is_a_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let sv = o3_tilde(random_theta(&mut rng, 3.0 * std::f64::consts::PI)).singular_values();
        assert!(sv.max() <= 1.0 + 1e-14);
    }
}

#[test]
fn rotations_about_one_axis_compose() {
    let axis = [0.3, -0.4, 0.5];
    for (a, b) in [(0.2, 0.7), (-1.1, 2.5), (3.0, 1.0)] {
        let lhs = o3(scaled(axis, a)) * o3(scaled(axis, b));
        let rhs = o3(scaled(axis, a + b));
        assert!((lhs - rhs).amax() < 1e-13);
    }
}

#[test]
fn small_angle_branch_is_continuous() {
    let axis = [0.6, 0.0, 0.8];
    for s in [1e-8, 5e-7, 9.99e-7, 1.0001e-6, 2e-6, 1e-5] {
        let t = scaled(axis, s);
        assert!((o3_tilde(t) - integrate_o3(t)).amax() < 1e-13, "{s}");
        let o = o3(t);
        assert!((o.transpose() * o - Matrix3::identity()).amax() < 1e-14);
    }
}

fn dense_exp(j: &[DMatrix<Complex64>], theta: [f64; 3]) -> DMatrix<Complex64> {
    let mut g = DMatrix::zeros(j[0].nrows(), j[0].ncols());
    for (m, &t) in j.iter().zip(&theta) {
        g += m * Complex64::new(0.0, -t);
    }
    g.exp()
}

#[test]
fn spin_operators_rotate_with_o3() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [1usize, 4, 10] {
        let b = FockBasis::two_mode(n);
        let j: Vec<DMatrix<Complex64>> = make_su2(b).unwrap().entries().iter().map(|o| o.to_dense()).collect();
        // restrict to n1 + n2 = n, where the truncated operators are exact
        let keep: Vec<usize> = (0..b.dim()).filter(|&i| b.total(i) == n).collect();
        let sub = |m: &DMatrix<Complex64>| DMatrix::from_fn(keep.len(), keep.len(), |r, c| m[(keep[r], keep[c])]);
        let js: Vec<_> = j.iter().map(sub).collect();
        for _ in 0..5 {
            let t = random_theta(&mut rng, std::f64::consts::PI);
            let u = dense_exp(&js, t);
            let o = o3(t);
            for k in 0..3 {
                let lhs = u.adjoint() * &js[k] * &u;
                let mut rhs = DMatrix::zeros(keep.len(), keep.len());
                for l in 0..3 {
                    rhs += &js[l] * Complex64::new(o[(k, l)], 0.0);
                }
                assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-9), "n={n}");
            }
        }
    }
}

#[test]
fn o6_operator_rotates_the_quadratic_monomials() {
    let n = 6;
    let b = FockBasis::two_mode(n);
    let nine = with_quadratics(&make_su2(b).unwrap()).unwrap();
    let keep: Vec<usize> = (0..b.dim()).filter(|&i| b.total(i) == n).collect();
    let sub = |m: &DMatrix<Complex64>| DMatrix::from_fn(keep.len(), keep.len(), |r, c| m[(keep[r], keep[c])]);
    let all: Vec<_> = nine.entries().iter().map(|o| sub(&o.to_dense())).collect();
    let t = [0.7, -0.3, 1.2];
    let u = dense_exp(&all[..3], t);
    let m = o6_operator(t);
    for k in 0..6 {
        let lhs = u.adjoint() * &all[3 + k] * &u;
        let mut rhs = DMatrix::zeros(keep.len(), keep.len());
        for l in 0..6 {
            rhs += &all[3 + l] * Complex64::new(m[(k, l)], 0.0);
        }
        assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-9), "row {k}");
    }
}

fn random_fixed_n_state(seed: u64, n: usize) -> StateVector {
    let b = FockBasis::two_mode(n + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(b.dim(), |i, _| {
        if b.total(i) == n {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    StateVector::from_amplitudes(b, v, "random").unwrap()
}

#[test]
fn heisenberg_moments_match_evolved_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let probes = [
        make_state(&StateSpec::new("psi_k").with("n", 6.0).with("k", 1.0)).unwrap(),
        random_fixed_n_state(6, 5),
    ];
    for s in probes {
        let a = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
        let m0 = moments(&s, &a).unwrap();
        for _ in 0..10 {
            let t = random_theta(&mut rng, 1.0);
            let direct = moments(&evolve(&s, &make_su2(s.basis()).unwrap(), &t).unwrap(), &a).unwrap();
            let rotated = heisenberg_transform(&m0, t).unwrap();
            let scale = max_abs(&direct.gamma).max(1.0);
            assert!((rotated.mean - direct.mean).amax() < 1e-8 * scale);
            assert!(max_abs(&(rotated.gamma - direct.gamma)) < 1e-8 * scale);
            assert!(max_abs(&(rotated.omega - direct.omega)) < 1e-8 * scale);
        }
    }
}

#[test]
fn printed_o6_vectorizes_symmetric_congruence() {
    let t = [-0.4, 0.9, 0.25];
    let o = o3(t);
    let q = Matrix3::new(0.5, 1.0, 2.0, 1.0, -1.0, 0.1, 2.0, 0.1, 3.0);
    let lhs = sym_coords(&(o * q * o.transpose()));
    let rhs = o6(t) * DVector::from_row_slice(&sym_coords(&q));
    for k in 0..6 {
        assert!((lhs[k] - rhs[k]).abs() < 1e-13);
    }
}

#[test]
fn block_transform_layout() {
    let tr = AdjointTransform::new([0.1, 0.2, 0.3]);
    let t = tr.block_transform();
    assert_eq!(t.shape(), (9, 9));
    assert!(t.view((0, 3), (3, 6)).iter().all(|&x| x == 0.0));
    assert!(t.view((3, 0), (6, 3)).iter().all(|&x| x == 0.0));
    let v = nalgebra::Vector3::new(0.0, 0.0, 1.0);
    assert!((tr.rotate(v) - tr.o3.column(2)).amax() < 1e-15);
}
