//! Simulated projective measurements and method-of-moments estimators.
//!
//! Randomness is keyed by `(seed, batch, observable)`: every stream is an
//! independent ChaCha generator, so batches can run in any order or in
//! parallel and still reproduce bit for bit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::herm_eigen;
use crate::operators::{ObservableVector, Operator};
use crate::states::{evolve, StateVector};

/// Relative gap (in units of the spectral range) below which eigenvalues merge.
pub const MERGE_TOL: f64 = 1e-8;
/// Largest Hilbert space for which a dense eigenbasis is built.
pub const MAX_DENSE_DIM: usize = 4096;
/// Relative slope threshold below which an observable is considered blind.
pub const SLOPE_TOL: f64 = 1e-10;

/// Projective measurement in the eigenbasis of an observable, with
/// numerically degenerate eigenvalues merged into one outcome.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub label: String,
    pub eigenvalues: Vec<f64>,
    bases: Vec<DMatrix<Complex64>>,
    pub merge_tol: f64,
}

impl MeasurementModel {
    pub fn new(op: &Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian(
                op.label().to_string(),
                op.matrix().hermitian_defect(),
            ));
        }
        let dim = op.basis().dim();
        if dim > MAX_DENSE_DIM {
            return Err(Error::Unsupported(format!(
                "measurement model on dimension {dim} exceeds {MAX_DENSE_DIM}"
            )));
        }
        let (vals, vecs) = herm_eigen(&op.to_dense());
        let range = vals[dim - 1] - vals[0];
        let tol = MERGE_TOL * range;
        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for k in 1..=dim {
            if k == dim || vals[k] - vals[k - 1] > tol {
                groups.push((start, k));
                start = k;
            }
        }
        let eigenvalues = groups
            .iter()
            .map(|&(a, b)| vals.rows(a, b - a).sum() / (b - a) as f64)
            .collect();
        let bases = groups
            .iter()
            .map(|&(a, b)| vecs.columns(a, b - a).into_owned())
            .collect();
        Ok(Self {
            label: op.label().to_string(),
            eigenvalues,
            bases,
            merge_tol: MERGE_TOL,
        })
    }

    pub fn outcomes(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Dense projectors Π_q = Σ |v⟩⟨v| over each merged eigenspace.
    pub fn projectors(&self) -> Vec<DMatrix<Complex64>> {
        self.bases.iter().map(|v| v * v.adjoint()).collect()
    }

    pub fn probabilities(&self, state: &StateVector) -> Vec<f64> {
        self.bases
            .iter()
            .map(|v| (v.adjoint() * state.amplitudes()).norm_squared())
            .collect()
    }
}

/// Random generator for one stream key.
pub fn stream_rng(seed: u64, batch: u64, observable: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((batch << 16) | observable);
    rng
}

/// Multinomial counts drawn as a chain of conditional binomials.
fn multinomial(probs: &[f64], shots: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining = shots;
    let mut rest: f64 = probs.iter().sum();
    for (q, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if q == probs.len() - 1 {
            counts[q] = remaining;
            break;
        }
        let cond = if rest > 0.0 { (p / rest).clamp(0.0, 1.0) } else { 0.0 };
        let k = Binomial::new(remaining, cond).expect("valid binomial").sample(rng);
        counts[q] = k;
        remaining -= k;
        rest -= p;
    }
    counts
}

/// Outcome counts for `shots` measurements of `model` on `state`.
pub fn sample(model: &MeasurementModel, state: &StateVector, shots: u64, seed: u64) -> Vec<u64> {
    let mut rng = stream_rng(seed, 0, 0);
    multinomial(&model.probabilities(state), shots, &mut rng)
}

pub fn sample_mean(model: &MeasurementModel, counts: &[u64]) -> f64 {
    let shots: u64 = counts.iter().sum();
    counts
        .iter()
        .zip(&model.eigenvalues)
        .map(|(&c, &v)| c as f64 * v)
        .sum::<f64>()
        / shots as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRun {
    pub nu: u64,
    pub seed: u64,
    pub batches: usize,
    pub theta_true: Vec<f64>,
    pub estimates: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub empirical_cov: Vec<Vec<f64>>,
    pub predicted_cov: Vec<Vec<f64>>,
}

impl EstimationRun {
    pub fn empirical(&self) -> DMatrix<f64> {
        to_matrix(&self.empirical_cov)
    }

    pub fn predicted(&self) -> DMatrix<f64> {
        to_matrix(&self.predicted_cov)
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |r, c| rows[r][c])
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn sample_covariance(estimates: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let b = estimates.len();
    let k = estimates.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; k];
    for e in estimates {
        for i in 0..k {
            mean[i] += e[i] / b as f64;
        }
    }
    let mut cov = DMatrix::zeros(k, k);
    for e in estimates {
        for i in 0..k {
            for j in 0..k {
                cov[(i, j)] += (e[i] - mean[i]) * (e[j] - mean[j]);
            }
        }
    }
    (mean, cov / (b.max(2) - 1) as f64)
}

/// −i⟨[M, H]⟩ = 2 Im⟨Mψ|Hψ⟩
fn slope(state: &StateVector, m: &Operator, h: &Operator) -> Result<f64> {
    let mv = state.apply_checked(m)?;
    let hv = state.apply_checked(h)?;
    Ok(2.0 * mv.dotc(&hv).im)
}

fn mean_var(state: &StateVector, m: &Operator) -> Result<(f64, f64)> {
    let v = state.apply_checked(m)?;
    let mean = state.amplitudes().dotc(&v).re;
    Ok((mean, v.norm_squared() - mean * mean))
}

fn calibration(state: &StateVector, h: &Operator, m: &Operator) -> Result<(f64, f64, f64)> {
    let s = slope(state, m, h)?;
    let threshold = SLOPE_TOL * m.matrix().norm_bound() * h.matrix().norm_bound();
    if s.abs() <= threshold {
        return Err(Error::Insensitive { slope: s, threshold });
    }
    let (mean, var) = mean_var(state, m)?;
    Ok((s, mean, var))
}

fn single_vector(op: &Operator) -> Result<ObservableVector> {
    ObservableVector::new(vec![op.clone()], crate::operators::AlgebraKind::Custom)
}

/// Error-propagation prediction Var(M)/(∂θ⟨M⟩)² per shot, evaluated after
/// rotating the probe to `reference`.
pub fn predicted_variance_single(h: &Operator, m: &Operator, state: &StateVector, reference: f64) -> Result<f64> {
    let probe = if reference == 0.0 {
        state.clone()
    } else {
        evolve(state, &single_vector(h)?, &[reference])?
    };
    let (s, _, var) = calibration(&probe, h, m)?;
    Ok(var / (s * s))
}

/// Estimates θ in exp(−iθH) from `batches` independent means of `shots`
/// measurements of M, linearizing ⟨M⟩_θ at θ = 0.
pub fn mom_estimate_single(
    h: &Operator,
    m: &Operator,
    state: &StateVector,
    theta_true: f64,
    shots: u64,
    batches: usize,
    seed: u64,
) -> Result<EstimationRun> {
    let (s, m0, var) = calibration(state, h, m)?;
    let probe = if theta_true == 0.0 {
        state.clone()
    } else {
        evolve(state, &single_vector(h)?, &[theta_true])?
    };
    let model = MeasurementModel::new(m)?;
    let probs = model.probabilities(&probe);
    let estimates: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64, 0);
            let counts = multinomial(&probs, shots, &mut rng);
            vec![(sample_mean(&model, &counts) - m0) / s]
        })
        .collect();
    let (mean, cov) = sample_covariance(&estimates);
    Ok(EstimationRun {
        nu: shots,
        seed,
        batches,
        theta_true: vec![theta_true],
        estimates,
        mean,
        empirical_cov: to_rows(&cov),
        predicted_cov: vec![vec![var / (s * s * shots as f64)]],
    })
}

/// Multiparameter version: each M_k is measured `shots` times per batch on
/// its own copies, and θ̂ = C⁻¹(M̄ − ⟨M⟩₀) with C_kl = −i⟨[M_k, H_l]⟩₀.
/// Separate copies make the sample means independent, so the prediction
/// uses only the variances of the M_k.
pub fn mom_estimate_multi(
    h: &ObservableVector,
    m: &ObservableVector,
    state: &StateVector,
    theta_true: &[f64],
    shots: u64,
    batches: usize,
    seed: u64,
) -> Result<EstimationRun> {
    let k = h.len();
    if m.len() != k || theta_true.len() != k {
        return Err(invalid(format!(
            "need equal counts of generators ({k}), observables ({}) and parameters ({})",
            m.len(),
            theta_true.len()
        )));
    }
    let mut c = DMatrix::zeros(k, k);
    let mut m0 = DVector::zeros(k);
    let mut models = Vec::with_capacity(k);
    for a in 0..k {
        for b in 0..k {
            c[(a, b)] = slope(state, m.get(a), h.get(b))?;
        }
        m0[a] = mean_var(state, m.get(a))?.0;
        models.push(MeasurementModel::new(m.get(a))?);
    }
    let svd = c.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let vt = svd.v_t.as_ref().unwrap();
    let blind: Vec<Vec<f64>> = (0..k)
        .filter(|&i| svd.singular_values[i] <= SLOPE_TOL * smax.max(f64::MIN_POSITIVE))
        .map(|i| vt.row(i).iter().copied().collect())
        .collect();
    if !blind.is_empty() {
        return Err(Error::Singular(format!("unestimable parameter directions {blind:?}")));
    }
    let cinv = c
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("calibration matrix".into()))?;
    let gamma = DMatrix::from_diagonal(&crate::estimation::covariance_matrix(state, m)?.diagonal());
    let predicted = &cinv * gamma * cinv.transpose() / shots as f64;

    let probe = if theta_true.iter().all(|&t| t == 0.0) {
        state.clone()
    } else {
        evolve(state, h, theta_true)?
    };
    let probs: Vec<Vec<f64>> = models.iter().map(|md| md.probabilities(&probe)).collect();
    let estimates: Vec<Vec<f64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let means = DVector::from_iterator(
                k,
                (0..k).map(|a| {
                    let mut rng = stream_rng(seed, b as u64, a as u64);
                    sample_mean(&models[a], &multinomial(&probs[a], shots, &mut rng))
                }),
            );
            (&cinv * (means - &m0)).iter().copied().collect()
        })
        .collect();
    let (mean, cov) = sample_covariance(&estimates);
    Ok(EstimationRun {
        nu: shots,
        seed,
        batches,
        theta_true: theta_true.to_vec(),
        estimates,
        mean,
        empirical_cov: to_rows(&cov),
        predicted_cov: to_rows(&predicted),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_su2, quadratic_extension};
    use crate::states::{make_state, StateSpec};

    fn fock(n1: f64, n2: f64) -> StateVector {
        make_state(&StateSpec::new("fock").with("n1", n1).with("n2", n2)).unwrap()
    }

    #[test]
    fn projectors_resolve_identity() {
        let s = make_state(&StateSpec::new("twin_fock").with("n", 4.0)).unwrap();
        let q = quadratic_extension(&make_su2(s.basis()).unwrap()).unwrap();
        let model = MeasurementModel::new(q.by_label("Jz^2").unwrap()).unwrap();
        let ps = model.projectors();
        let sum = ps
            .iter()
            .fold(DMatrix::zeros(s.basis().dim(), s.basis().dim()), |a, p| a + p);
        assert!((sum - DMatrix::identity(s.basis().dim(), s.basis().dim())).norm() < 1e-10);
        for i in 0..ps.len() {
            for j in 0..i {
                assert!((&ps[i] * &ps[j]).norm() < 1e-10);
            }
        }
        let p: f64 = model.probabilities(&s).iter().sum();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenstate_gives_single_outcome() {
        let s = make_state(&StateSpec::new("twin_fock").with("n", 4.0)).unwrap();
        let j = make_su2(s.basis()).unwrap();
        let model = MeasurementModel::new(j.get(2)).unwrap();
        let counts = sample(&model, &s, 1000, 3);
        let zero = model.eigenvalues.iter().position(|v| v.abs() < 1e-9).unwrap();
        assert_eq!(counts[zero], 1000);
    }

    #[test]
    fn half_spin_chi_square() {
        let s = fock(1.0, 0.0);
        let j = make_su2(s.basis()).unwrap();
        let model = MeasurementModel::new(j.get(0)).unwrap();
        let nu = 100_000u64;
        let counts = sample(&model, &s, nu, 11);
        let probs = model.probabilities(&s);
        let mut chi2 = 0.0;
        let mut outcomes = 0;
        for (q, &p) in probs.iter().enumerate() {
            if p > 1e-12 {
                let e = p * nu as f64;
                chi2 += (counts[q] as f64 - e).powi(2) / e;
                outcomes += 1;
                assert!((model.eigenvalues[q].abs() - 0.5).abs() < 1e-12);
            }
        }
        assert_eq!(outcomes, 2);
        // one degree of freedom, 99.9% quantile
        assert!(chi2 < 10.83, "chi2 = {chi2}");
    }

    #[test]
    fn blind_observable_rejected() {
        let s = make_state(&StateSpec::new("twin_fock").with("n", 4.0)).unwrap();
        let j = make_su2(s.basis()).unwrap();
        let q = quadratic_extension(&j).unwrap();
        let e = mom_estimate_single(j.get(1), q.by_label("Jz^2").unwrap(), &s, 0.0, 100, 2, 0).unwrap_err();
        assert!(matches!(e, Error::Insensitive { .. }));
    }

    #[test]
    fn seeded_runs_repeat() {
        let s = fock(4.0, 0.0);
        let j = make_su2(s.basis()).unwrap();
        let a = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 1000, 16, 5).unwrap();
        let b = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 1000, 16, 5).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = mom_estimate_single(j.get(1), j.get(0), &s, 0.0, 1000, 16, 6).unwrap();
        assert_ne!(a.estimates, c.estimates);
    }
}
