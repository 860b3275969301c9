use mk_core::adjoint::{o3, o3_tilde};
use mk_core::estimation::{analyze, moment_matrix, moments};
use mk_core::linalg::{max_abs, min_eigenvalue};
use mk_core::operators::{make_su11_two_mode, make_su2, with_quadratics, FockBasis};
use mk_core::states::StateVector;
use nalgebra::{DVector, Matrix3};
use num_complex::Complex64;
use proptest::prelude::*;

/// Random state supported on n1 + n2 = n, or on n1 + n2 <= n when `mixed`.
fn arb_state() -> impl Strategy<Value = StateVector> {
    (1usize..=6, any::<bool>()).prop_flat_map(|(n, mixed)| {
        let b = FockBasis::two_mode(n + 2);
        let support: Vec<usize> = (0..b.dim())
            .filter(|&i| if mixed { b.total(i) <= n } else { b.total(i) == n })
            .collect();
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), support.len()).prop_filter_map("zero vector", move |xs| {
            let mut v = DVector::zeros(b.dim());
            for (&i, (re, im)) in support.iter().zip(xs) {
                v[i] = Complex64::new(re, im);
            }
            (v.norm() > 1e-3).then(|| StateVector::from_amplitudes(b, v, "random").unwrap())
        })
    })
}

fn arb_theta(max: f64) -> impl Strategy<Value = [f64; 3]> {
    [-max..max, -max..max, -max..max]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn moment_matrices_are_well_formed(s in arb_state()) {
        for a in [
            with_quadratics(&make_su2(s.basis()).unwrap()).unwrap(),
            make_su11_two_mode(s.basis()).unwrap(),
        ] {
            let m = moments(&s, &a).unwrap();
            let scale = max_abs(&m.gamma).max(1.0);
            prop_assert!(min_eigenvalue(&m.gamma) >= -1e-10 * scale);
            prop_assert!(max_abs(&(&m.gamma - m.gamma.transpose())) <= 1e-12 * scale);
            prop_assert!(max_abs(&(&m.omega + m.omega.transpose())) <= 1e-12 * scale);
            let mm = moment_matrix(&s, &a).unwrap().moment;
            let mscale = max_abs(&mm).max(1.0);
            prop_assert!(min_eigenvalue(&mm) >= -1e-9 * mscale);
        }
    }

    #[test]
    fn moments_never_beat_the_quantum_bound(s in arb_state()) {
        let a = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
        let rep = analyze(&s, &a, &["Jx", "Jy", "Jz"], None).unwrap();
        let gap = rep.qfim.unwrap().to_dmatrix() - rep.precision_inv.to_dmatrix();
        let scale = max_abs(&gap).max(1.0);
        prop_assert!(min_eigenvalue(&gap) >= -1e-8 * scale, "{}", min_eigenvalue(&gap));
    }

    #[test]
    fn rotations_are_orthogonal(t in arb_theta(10.0)) {
        let o = o3(t);
        prop_assert!((o.transpose() * o - Matrix3::identity()).amax() < 1e-13);
        prop_assert!((o.determinant() - 1.0).abs() < 1e-13);
        prop_assert!(o3_tilde(t).singular_values().max() <= 1.0 + 1e-13);
    }

    #[test]
    fn rotation_axis_is_fixed(t in arb_theta(3.0)) {
        let v = nalgebra::Vector3::new(t[0], t[1], t[2]);
        prop_assert!((o3(t) * v - v).amax() < 1e-12);
        prop_assert!((o3_tilde(t) * v - v).amax() < 1e-12);
    }
}
