use mk_core::scenarios::*;
use mk_core::states::{make_state, StateSpec};
use mk_core::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn p(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), ParamValue::Num(*v))).collect()
}

fn scalar(r: &ScenarioResult, key: &str) -> f64 {
    match &r.computed[key] {
        Computed::Scalar(v) => *v,
        Computed::Matrix(_) => panic!("{key} is a matrix"),
    }
}

#[test]
fn every_registered_scenario_runs_with_defaults() {
    let expected_red = ["gaussian_table"];
    for (name, _) in list() {
        let r = run_scenario(name, &Params::new()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(r.name, name);
        if !expected_red.contains(&name) {
            assert!(r.passed, "{name}: {:?}", r.rel_err);
        }
        for (k, e) in &r.rel_err {
            assert!(r.reference.contains_key(k));
            assert!(e.is_finite(), "{name}.{k}");
        }
    }
}

#[test]
fn results_round_trip_through_json() {
    let r = run_scenario("su2_tf_mom", &p(&[("n", 4.0)])).unwrap();
    let text = serde_json::to_string(&r).unwrap();
    let back: ScenarioResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, r);
}

#[test]
fn text_parameters_are_accepted() {
    let mut params = p(&[("n", 6.0)]);
    params.insert("family".into(), ParamValue::Text("noon".into()));
    let r = run_scenario("su2_single", &params).unwrap();
    assert!(r.passed);
    assert!((scalar(&r, "qfi") - 36.0).abs() < 1e-9);
    params.insert("family".into(), ParamValue::Text("coherent".into()));
    assert!(run_scenario("su2_single", &params).is_err());
}

#[test]
fn bad_parameters_are_errors() {
    assert!(matches!(
        run_scenario("missing", &Params::new()),
        Err(Error::UnknownScenario(_))
    ));
    assert!(run_scenario("su2_tf_mom", &p(&[("n", 2.5)])).is_err());
    assert!(run_scenario("su2_tf_mom", &p(&[("n", 3.0)])).is_err());
    assert!(run_scenario("gaussian_table", &p(&[("row", 6.0)])).is_err());
    assert!(run_scenario("cat_scaling", &p(&[("alpha_min", 3.0), ("alpha_max", 2.0)])).is_err());
}

#[test]
fn sweep_fits_the_scaling_exponent() {
    let grid: Vec<Params> = [2.0, 4.0, 8.0, 16.0].iter().map(|&n| p(&[("n", n)])).collect();
    let s = sweep("su2_single", &grid).unwrap();
    assert_eq!(s.points.len(), 4);
    assert!(s.passed);
    // twin-Fock n(n/2+1) has a local exponent between 1 and 2
    let slope = s.slope.unwrap();
    assert!(slope > 1.0 && slope < 2.0);
    assert!(sweep("su2_single", &[]).is_err());
}

#[test]
fn slope_fit_ignores_nonpositive_points() {
    assert_eq!(loglog_slope(&[(1.0, 2.0)]), None);
    let pts = [(1.0, 1.0), (0.0, 5.0), (2.0, 8.0), (4.0, 64.0)];
    assert!((loglog_slope(&pts).unwrap() - 3.0).abs() < 1e-12);
}

/// Moment matrix from dense Hermitian operators: Γ = Re⟨A_kA_l⟩ − ⟨A_k⟩⟨A_l⟩,
/// Ω = −i⟨[A_k, A_l]⟩, M = Ωᵀ Γ⁻¹ Ω.
fn dense_moment(psi: &nalgebra::DVector<Complex64>, ops: &[DMatrix<Complex64>]) -> DMatrix<f64> {
    let k = ops.len();
    let v: Vec<_> = ops.iter().map(|o| o * psi).collect();
    let mean: Vec<f64> = v.iter().map(|x| psi.dotc(x).re).collect();
    let g = DMatrix::from_fn(k, k, |a, b| v[a].dotc(&v[b]).re - mean[a] * mean[b]);
    let w = DMatrix::from_fn(k, k, |a, b| 2.0 * v[a].dotc(&v[b]).im);
    w.transpose() * g.try_inverse().unwrap() * w
}

#[test]
fn squeezed_probe_spin_precision_against_dense_oracle() {
    let nbar = 2.0;
    let r = run_scenario("gaussian_table", &p(&[("row", 1.0), ("nbar", nbar)])).unwrap();
    let computed = scalar(&r, "precision[Jz]");
    let s = make_state(&StateSpec::new("single_mode_squeezed").with("r", 2.0 * nbar.sqrt().asinh())).unwrap();
    let a = mk_core::operators::algebra_by_name("gaussian_full", s.basis())
        .unwrap()
        .select(&["Ly", "Jx", "Jy", "Jz"])
        .unwrap();
    // mode 2 starts empty and each factor adds at most one quantum to it
    let b = s.basis();
    let keep: Vec<usize> = (0..b.dim()).filter(|&i| b.occupations(i)[1] <= 3).collect();
    let sub = |op: &mk_core::operators::Operator| {
        let mut m = DMatrix::zeros(keep.len(), keep.len());
        let pos: std::collections::HashMap<usize, usize> = keep.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        for (r, c, v) in op.matrix().triplets() {
            if let (Some(&pr), Some(&pc)) = (pos.get(&r), pos.get(&c)) {
                m[(pr, pc)] = v;
            }
        }
        m
    };
    let dense: Vec<DMatrix<Complex64>> = a.entries().iter().map(sub).collect();
    let psi = nalgebra::DVector::from_iterator(keep.len(), keep.iter().map(|&i| s.amplitudes()[i]));
    let m = dense_moment(&psi, &dense);
    assert!((computed - m[(3, 3)]).abs() < 1e-6 * computed);
    assert!((computed - 2.0 * nbar * (1.0 + nbar)).abs() < 1e-6 * computed);
}

#[test]
fn two_mode_squeezed_probe_coefficient() {
    for nbar in [1.0, 2.0, 4.0] {
        let r = run_scenario("gaussian_table", &p(&[("row", 3.0), ("nbar", nbar)])).unwrap();
        let c = scalar(&r, "observed_Lx_coefficient");
        let want = -2.0 * (nbar * (nbar + 2.0)).sqrt() / (nbar + 1.0);
        assert!((c - want).abs() < 1e-6, "nbar={nbar}: {c}");
        assert!(r.rel_err["precision[Jx]"] < TRUNCATED_TOL);
    }
}

#[test]
fn coherent_probe_rows_pass() {
    for row in [2.0, 4.0, 5.0] {
        for nbar in [1.0, 2.0, 4.0] {
            let r = run_scenario("gaussian_table", &p(&[("row", row), ("nbar", nbar)])).unwrap();
            assert!(r.passed, "row {row} nbar {nbar}: {:?}", r.rel_err);
        }
    }
}

#[test]
fn psi_k_formula_holds_away_from_adjacent_components() {
    for n in 0..=12usize {
        for k in 0..=n {
            let r = run_scenario("su2_psi_k", &p(&[("n", n as f64), ("k", k as f64)])).unwrap();
            let gap = (n as i64 - 2 * k as i64).unsigned_abs();
            assert_eq!(r.passed, gap != 1 && gap != 2, "n={n} k={k}");
        }
    }
}

#[test]
fn superposition_behaves_like_mixture() {
    for n in [1.0, 3.0, 6.0] {
        assert!(
            run_scenario("superposition_vs_mixture", &p(&[("n", n)]))
                .unwrap()
                .passed
        );
    }
}
