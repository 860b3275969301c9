use mk_core::montecarlo::*;
use mk_core::operators::{make_su2, with_quadratics, AlgebraKind, ObservableVector};
use mk_core::scenarios::loglog_slope;
use mk_core::states::{make_state, StateSpec, StateVector};
use mk_core::Error;
use nalgebra::DMatrix;
use num_complex::Complex64;

fn st(family: &str, n: f64) -> StateVector {
    make_state(&StateSpec::new(family).with("n", n)).unwrap()
}

#[test]
fn estimator_spread_shrinks_as_inverse_root_of_shots() {
    let s = st("fock", 4.0);
    let j = make_su2(s.basis()).unwrap();
    let pts: Vec<(f64, f64)> = [1000u64, 1800, 3200, 5600, 10000]
        .iter()
        .map(|&nu| {
            let run = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, nu, 400, 17).unwrap();
            (nu as f64, run.empirical()[(0, 0)].sqrt())
        })
        .collect();
    let slope = loglog_slope(&pts).unwrap();
    assert!((slope + 0.5).abs() <= 0.1, "slope {slope}");
}

#[test]
fn estimator_is_unbiased_and_matches_error_propagation() {
    let s = st("fock", 4.0);
    let j = make_su2(s.basis()).unwrap();
    let batches = 2000;
    let run = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 2000, batches, 5).unwrap();
    let var = run.empirical()[(0, 0)];
    let predicted = run.predicted()[(0, 0)];
    assert!((predicted * 2000.0 - 0.25).abs() < 1e-12);
    assert!(run.mean[0].abs() < 4.0 * (var / batches as f64).sqrt());
    // relative spread of a sample variance is about sqrt(2/B)
    assert!((var / predicted - 1.0).abs() < 4.0 * (2.0 / batches as f64).sqrt());
}

#[test]
fn estimates_track_a_small_true_phase() {
    let s = st("fock", 6.0);
    let j = make_su2(s.basis()).unwrap();
    let theta = 0.01;
    let run = mom_estimate_single(j.get(1), j.get(0), &s, theta, 5000, 1000, 8).unwrap();
    let se = (run.empirical()[(0, 0)] / 1000.0).sqrt();
    // linearization bias is O(θ³)
    assert!((run.mean[0] - theta).abs() < 4.0 * se + 1e-5);
}

#[test]
fn blind_observable_is_reported() {
    let s = st("twin_fock", 4.0);
    let q = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
    let jy = q.by_label("Jy").unwrap();
    let jz2 = q.by_label("Jz^2").unwrap();
    assert!(matches!(
        mom_estimate_single(jy, jz2, &s, 0.0, 100, 2, 0),
        Err(Error::Insensitive { .. })
    ));
    assert!(matches!(
        predicted_variance_single(jy, jz2, &s, 0.0),
        Err(Error::Insensitive { .. })
    ));
}

/// Var_θ(M) / (∂θ⟨M⟩_θ)² at θ, from dense exponentials and a central difference.
fn propagated_variance(s: &StateVector, h: &DMatrix<Complex64>, m: &DMatrix<Complex64>, theta: f64) -> f64 {
    let psi = s.amplitudes();
    let at = |t: f64| (h * Complex64::new(0.0, -t)).exp() * psi;
    let mean = |t: f64| {
        let v = at(t);
        v.dotc(&(m * &v)).re
    };
    let v = at(theta);
    let mv = m * &v;
    let var = mv.norm_squared() - v.dotc(&mv).re.powi(2);
    let step = 1e-6;
    let d = (mean(theta + step) - mean(theta - step)) / (2.0 * step);
    var / (d * d)
}

#[test]
fn twin_fock_number_squared_readout_off_origin() {
    let n = 6.0;
    let s = st("twin_fock", n);
    let q = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
    let jy = q.by_label("Jy").unwrap();
    let jz2 = q.by_label("Jz^2").unwrap();
    let reference = 1e-4;
    let got = predicted_variance_single(jy, jz2, &s, reference).unwrap();
    let oracle = propagated_variance(&s, &jy.to_dense(), &jz2.to_dense(), reference);
    assert!((got / oracle - 1.0).abs() < 1e-5, "{got} vs {oracle}");
    // approaches the twin-Fock bound 1/(n(n+2)/2) near the origin
    assert!((got * n * (n + 2.0) / 2.0 - 1.0).abs() < 1e-3);
}

#[test]
fn multi_with_one_parameter_reproduces_single() {
    let s = st("fock", 3.0);
    let j = make_su2(s.basis()).unwrap();
    let h = j.select(&["Jy"]).unwrap();
    let m = j.select(&["Jx"]).unwrap();
    let single = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 500, 64, 99).unwrap();
    let multi = mom_estimate_multi(&h, &m, &s, &[0.0], 500, 64, 99).unwrap();
    for (a, b) in single.estimates.iter().zip(&multi.estimates) {
        assert!((a[0] - b[0]).abs() < 1e-14);
    }
    assert!((single.predicted()[(0, 0)] - multi.predicted()[(0, 0)]).abs() < 1e-15);
}

#[test]
fn multi_prediction_for_twin_fock_quadratic_readout() {
    let n = 4.0;
    let s = st("twin_fock", n);
    let q = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
    let h = q.select(&["Jx", "Jy"]).unwrap();
    let m = q.select(&["{Jy,Jz}", "{Jx,Jz}"]).unwrap();
    let run = mom_estimate_multi(&h, &m, &s, &[0.0, 0.0], 1000, 16, 3).unwrap();
    let inv = run.predicted().try_inverse().unwrap() / 1000.0;
    let e = n * (n + 2.0) / 2.0;
    assert!((inv[(0, 0)] - e).abs() < 1e-9 * e);
    assert!((inv[(1, 1)] - e).abs() < 1e-9 * e);
    assert!(inv[(0, 1)].abs() < 1e-9 * e);
}

#[test]
fn multi_rejects_blind_directions() {
    let s = st("twin_fock", 4.0);
    let q = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
    let h = q.select(&["Jx", "Jz"]).unwrap();
    let m = q.select(&["{Jy,Jz}", "{Jx,Jz}"]).unwrap();
    assert!(matches!(
        mom_estimate_multi(&h, &m, &s, &[0.0, 0.0], 10, 2, 0),
        Err(Error::Singular(_))
    ));
    let short = q.select(&["Jx"]).unwrap();
    assert!(mom_estimate_multi(&h, &short, &s, &[0.0, 0.0], 10, 2, 0).is_err());
}

#[test]
fn runs_are_reproducible_and_seed_dependent() {
    let s = st("fock", 4.0);
    let j = make_su2(s.basis()).unwrap();
    let a = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 300, 32, 1).unwrap();
    let b = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 300, 32, 1).unwrap();
    let c = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 300, 32, 2).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_ne!(a.estimates, c.estimates);
}

#[test]
fn sampled_frequencies_follow_born_rule() {
    let s = st("fock", 4.0);
    let j = make_su2(s.basis()).unwrap();
    let model = MeasurementModel::new(j.get(0)).unwrap();
    let p = model.probabilities(&s);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let shots = 200_000;
    let counts = sample(&model, &s, shots, 4);
    assert_eq!(counts.iter().sum::<u64>(), shots);
    for (c, q) in counts.iter().zip(&p) {
        let sd = (shots as f64 * q * (1.0 - q)).sqrt();
        assert!((*c as f64 - shots as f64 * q).abs() <= 5.0 * sd + 1.0);
    }
    assert!((sample_mean(&model, &counts)).abs() < 0.02);
}

#[test]
fn degenerate_eigenvalues_merge_into_one_outcome() {
    let s = st("twin_fock", 4.0);
    let q = with_quadratics(&make_su2(s.basis()).unwrap()).unwrap();
    let model = MeasurementModel::new(q.by_label("Jz^2").unwrap()).unwrap();
    let mut vals = model.eigenvalues.clone();
    vals.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    assert_eq!(vals.len(), model.outcomes());
}

#[test]
fn custom_observable_vectors_are_accepted() {
    let s = st("fock", 2.0);
    let j = make_su2(s.basis()).unwrap();
    let h = ObservableVector::new(vec![j.get(1).clone()], AlgebraKind::Custom).unwrap();
    let m = ObservableVector::new(vec![j.get(0).clone()], AlgebraKind::Custom).unwrap();
    assert!(mom_estimate_multi(&h, &m, &s, &[0.0], 10, 2, 0).is_ok());
}
