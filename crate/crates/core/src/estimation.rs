//! Covariance and commutator matrices, pure-state QFIM, moment matrices and
//! optimal observables for the method of moments.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::adjoint::o3_tilde;
use crate::error::{invalid, Error, Result};
use crate::linalg::{pinv_sym, sym_eigen, symmetrize, REL_TOL};
use crate::operators::{AlgebraKind, ObservableVector};
use crate::propagator::{adaptive_simpson, Propagator};
use crate::sparse::CsrMatrix;
use crate::states::StateVector;

/// Absolute floor below which a whole Ω (or Γ) counts as zero.
const ABS_FLOOR: f64 = 1e-12;
/// Target accuracy of the quadrature defining H̃ away from θ = 0.
pub const QUADRATURE_TOL: f64 = 1e-9;

/// First and second moments of an observable vector on one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub labels: Vec<String>,
    pub mean: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub omega: DMatrix<f64>,
}

fn check_hermitian(obs: &ObservableVector) -> Result<()> {
    for e in obs.entries() {
        if !e.is_hermitian() {
            return Err(Error::NotHermitian(
                e.label().to_string(),
                e.matrix().hermitian_defect(),
            ));
        }
    }
    Ok(())
}

/// Moments from the vectors v_k = A_k|ψ⟩ via P_kl = ⟨v_k|v_l⟩.
fn moments_from_vectors(labels: Vec<String>, psi: &DVector<Complex64>, vs: &[DVector<Complex64>]) -> Moments {
    let k = vs.len();
    let mean = DVector::from_iterator(k, vs.iter().map(|v| psi.dotc(v).re));
    let centered: Vec<DVector<Complex64>> = vs
        .iter()
        .zip(mean.iter())
        .map(|(v, &m)| v - psi * Complex64::new(m, 0.0))
        .collect();
    let mut gamma = DMatrix::zeros(k, k);
    let mut omega = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let p = centered[a].dotc(&centered[b]);
            let g = p.re;
            gamma[(a, b)] = g;
            gamma[(b, a)] = g;
            if a != b {
                omega[(a, b)] = 2.0 * p.im;
                omega[(b, a)] = -2.0 * p.im;
            }
        }
    }
    Moments {
        labels,
        mean,
        gamma,
        omega,
    }
}

pub fn moments(state: &StateVector, obs: &ObservableVector) -> Result<Moments> {
    check_hermitian(obs)?;
    let vs = obs
        .entries()
        .iter()
        .map(|op| state.apply_checked(op))
        .collect::<Result<Vec<_>>>()?;
    Ok(moments_from_vectors(obs.labels(), state.amplitudes(), &vs))
}

/// Γ_kl = ½⟨{A_k, A_l}⟩ − ⟨A_k⟩⟨A_l⟩
pub fn covariance_matrix(state: &StateVector, obs: &ObservableVector) -> Result<DMatrix<f64>> {
    Ok(moments(state, obs)?.gamma)
}

/// Ω_kl = −i⟨[A_k, A_l]⟩
pub fn commutator_matrix(state: &StateVector, obs: &ObservableVector) -> Result<DMatrix<f64>> {
    Ok(moments(state, obs)?.omega)
}

/// Vectors H̃_k(θ)|ψ⟩ with H̃_k = ∫₀¹ e^{isθ·H} H_k e^{−isθ·H} ds.
fn effective_generator_vectors(
    state: &StateVector,
    h: &ObservableVector,
    theta: &[f64],
) -> Result<Vec<DVector<Complex64>>> {
    if theta.len() != h.len() {
        return Err(invalid(format!(
            "theta has {} entries for {} generators",
            theta.len(),
            h.len()
        )));
    }
    check_hermitian(h)?;
    let direct = h
        .entries()
        .iter()
        .map(|op| state.apply_checked(op))
        .collect::<Result<Vec<_>>>()?;
    if theta.iter().all(|&t| t == 0.0) {
        return Ok(direct);
    }
    let mut g = CsrMatrix::zeros(state.basis().dim());
    for (op, &t) in h.entries().iter().zip(theta) {
        g = g.axpby(Complex64::new(1.0, 0.0), op.matrix(), Complex64::new(t, 0.0));
    }
    let prop = Propagator::new(&g);
    let psi = state.amplitudes();
    Ok(h.entries()
        .iter()
        .map(|op| {
            let f = |s: f64| prop.conjugated(op.matrix(), s, psi);
            adaptive_simpson(&f, 0.0, 1.0, QUADRATURE_TOL)
        })
        .collect())
}

fn is_su2_triple(h: &ObservableVector) -> bool {
    h.kind() == AlgebraKind::Su2 && h.labels() == ["Jx", "Jy", "Jz"]
}

/// F^Q = 4 Γ[H̃(θ)] on the initial state.
///
/// At θ = 0 this is 4Γ[H]. For the su(2) triple the closed-form Õ3 is used;
/// other generator sets go through numerical quadrature.
pub fn qfim_pure(state: &StateVector, h: &ObservableVector, theta: &[f64]) -> Result<DMatrix<f64>> {
    if theta.len() != h.len() {
        return Err(invalid(format!(
            "theta has {} entries for {} generators",
            theta.len(),
            h.len()
        )));
    }
    if theta.iter().any(|&t| t != 0.0) && is_su2_triple(h) {
        let g0 = covariance_matrix(state, h)?;
        let ot = o3_tilde([theta[0], theta[1], theta[2]]);
        let ot = DMatrix::from_fn(3, 3, |r, c| ot[(r, c)]);
        return Ok(symmetrize(&(&ot * g0 * ot.transpose())) * 4.0);
    }
    qfim_numeric(state, h, theta)
}

/// F^Q through numerically integrated H̃, whatever the algebra.
pub fn qfim_numeric(state: &StateVector, h: &ObservableVector, theta: &[f64]) -> Result<DMatrix<f64>> {
    let vs = effective_generator_vectors(state, h, theta)?;
    Ok(moments_from_vectors(h.labels(), state.amplitudes(), &vs).gamma * 4.0)
}

/// |⟨[H̃_j, H̃_k]⟩| on the initial state; all zero iff the multiparameter
/// quantum Cramér-Rao bound is saturable.
pub fn saturation_check(state: &StateVector, h: &ObservableVector, theta: &[f64]) -> Result<DMatrix<f64>> {
    let vs = effective_generator_vectors(state, h, theta)?;
    Ok(moments_from_vectors(h.labels(), state.amplitudes(), &vs).omega.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcrbScalar {
    pub value: f64,
    pub support: Vec<usize>,
    pub excluded: Vec<usize>,
}

/// tr[(F^Q)⁻¹] on the parameters with nonzero Fisher information.
pub fn qcrb_scalar(f: &DMatrix<f64>) -> Result<QcrbScalar> {
    let n = f.nrows();
    let scale = (0..n).map(|i| f[(i, i)].abs()).fold(0.0, f64::max);
    let (support, excluded): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| scale > ABS_FLOOR && f[(i, i)] > REL_TOL * scale);
    if support.is_empty() {
        return Err(Error::Singular(format!(
            "Fisher matrix vanishes in all directions {excluded:?}"
        )));
    }
    let sub = DMatrix::from_fn(support.len(), support.len(), |r, c| f[(support[r], support[c])]);
    let (inv, _) = pinv_sym(&sub, REL_TOL);
    Ok(QcrbScalar {
        value: inv.trace(),
        support,
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// Expectation value does not depend on any parameter (zero Ω row).
    Insensitive,
    /// Linearly dependent on the other observables on this state (null Γ direction).
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub label: String,
    pub reason: DropReason,
}

/// Moment matrix with its pruning record.
///
/// Rows and columns of `moment` are indexed by every label of the input
/// vector read as a generator direction; only the `measured` observables
/// enter the estimator.
#[derive(Debug, Clone)]
pub struct MomentAnalysis {
    pub labels: Vec<String>,
    pub measured: Vec<usize>,
    pub dropped: Vec<Dropped>,
    pub moments: Moments,
    pub gamma_inv: DMatrix<f64>,
    pub moment: DMatrix<f64>,
    pub effective_rank: usize,
}

impl MomentAnalysis {
    pub fn measured_labels(&self) -> Vec<String> {
        self.measured.iter().map(|&i| self.labels[i].clone()).collect()
    }

    /// Ω restricted to measured rows, all generator columns.
    pub fn omega_measured(&self) -> DMatrix<f64> {
        let om = &self.moments.omega;
        DMatrix::from_fn(self.measured.len(), om.ncols(), |r, c| om[(self.measured[r], c)])
    }

    pub fn gamma_measured(&self) -> DMatrix<f64> {
        let g = &self.moments.gamma;
        DMatrix::from_fn(self.measured.len(), self.measured.len(), |r, c| {
            g[(self.measured[r], self.measured[c])]
        })
    }
}

fn prune(m: &Moments) -> (Vec<usize>, Vec<Dropped>) {
    let n = m.labels.len();
    let mut alive: Vec<usize> = (0..n).collect();
    let mut dropped = Vec::new();
    let gscale = m.gamma.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    loop {
        let norms: Vec<f64> = alive.iter().map(|&i| m.omega.row(i).norm()).collect();
        let max = norms.iter().copied().fold(0.0, f64::max);
        let floor = (REL_TOL * max).max(ABS_FLOOR * gscale);
        let before = alive.len();
        let mut keep = Vec::with_capacity(alive.len());
        for (p, &i) in alive.iter().enumerate() {
            if norms[p] <= floor {
                dropped.push(Dropped {
                    label: m.labels[i].clone(),
                    reason: DropReason::Insensitive,
                });
            } else {
                keep.push(i);
            }
        }
        alive = keep;
        if alive.is_empty() {
            break;
        }
        let g = DMatrix::from_fn(alive.len(), alive.len(), |r, c| m.gamma[(alive[r], alive[c])]);
        let (vals, vecs) = sym_eigen(&g);
        let lmax = vals[vals.len() - 1].max(0.0);
        if vals[0] <= (REL_TOL * lmax).max(ABS_FLOOR * gscale) {
            let u = vecs.column(0);
            let mut pick = 0;
            for p in 1..u.len() {
                if u[p].abs() >= u[pick].abs() * (1.0 - 1e-9) {
                    pick = p;
                }
            }
            dropped.push(Dropped {
                label: m.labels[alive[pick]].clone(),
                reason: DropReason::Degenerate,
            });
            alive.remove(pick);
            continue;
        }
        if alive.len() == before {
            break;
        }
    }
    (alive, dropped)
}

impl MomentAnalysis {
    pub fn from_moments(moments: Moments) -> Result<Self> {
        let (measured, dropped) = prune(&moments);
        let n = moments.labels.len();
        let mut a = MomentAnalysis {
            labels: moments.labels.clone(),
            measured,
            dropped,
            moments,
            gamma_inv: DMatrix::zeros(0, 0),
            moment: DMatrix::zeros(n, n),
            effective_rank: 0,
        };
        if a.measured.is_empty() {
            return Ok(a);
        }
        let g = a.gamma_measured();
        let d = DVector::from_iterator(
            g.nrows(),
            g.diagonal().iter().map(|x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt()),
        );
        let scaled = DMatrix::from_fn(g.nrows(), g.ncols(), |r, c| g[(r, c)] * d[r] * d[c]);
        let (inv_scaled, rank) = pinv_sym(&scaled, REL_TOL);
        let inv = symmetrize(&DMatrix::from_fn(g.nrows(), g.ncols(), |r, c| {
            inv_scaled[(r, c)] * d[r] * d[c]
        }));
        if rank < g.nrows() {
            return Err(Error::Singular(format!(
                "covariance of {:?} has rank {rank} after pruning",
                a.measured_labels()
            )));
        }
        let om = a.omega_measured();
        a.moment = symmetrize(&(om.transpose() * &inv * &om));
        a.gamma_inv = inv;
        a.effective_rank = rank;
        Ok(a)
    }
}

/// M = Ωᵀ Γ⁻¹ Ω after pruning.
pub fn moment_matrix(state: &StateVector, obs: &ObservableVector) -> Result<MomentAnalysis> {
    MomentAnalysis::from_moments(moments(state, obs)?)
}

/// Ωᵀ (Γ + εI)⁻¹ Ω over all observables, without pruning.
pub fn moment_matrix_regularized(moments: &Moments, eps: f64) -> DMatrix<f64> {
    let n = moments.labels.len();
    let g = &moments.gamma + DMatrix::identity(n, n) * eps;
    let inv = g.try_inverse().expect("regularized covariance is positive definite");
    symmetrize(&(moments.omega.transpose() * inv * &moments.omega))
}

/// Selection matrix whose rows pick the named labels.
pub fn selection(labels: &[String], targets: &[&str]) -> Result<DMatrix<f64>> {
    let mut r = DMatrix::zeros(targets.len(), labels.len());
    for (row, t) in targets.iter().enumerate() {
        let col = labels
            .iter()
            .position(|l| l == t)
            .ok_or_else(|| invalid(format!("target `{t}` is not among {labels:?}")))?;
        r[(row, col)] = 1.0;
    }
    Ok(r)
}

/// R·M·Rᵀ, the ν-normalized inverse covariance reachable by the method of moments.
pub fn precision_matrix(analysis: &MomentAnalysis, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if r.ncols() != analysis.labels.len() {
        return Err(invalid(format!(
            "R has {} columns for {} observables",
            r.ncols(),
            analysis.labels.len()
        )));
    }
    Ok(symmetrize(&(r * &analysis.moment * r.transpose())))
}

/// S = G⁻¹·R·Ω·Γ⁻¹ with rows over the targets and columns over the measured
/// observables; M⃗ = S·A⃗ attains R·M·Rᵀ.
pub fn optimal_observables(
    analysis: &MomentAnalysis,
    r: &DMatrix<f64>,
    g: Option<&DMatrix<f64>>,
) -> Result<DMatrix<f64>> {
    if r.ncols() != analysis.labels.len() {
        return Err(invalid("R column count does not match observables"));
    }
    let k = r.nrows();
    let ginv = match g {
        None => DMatrix::identity(k, k),
        Some(g) => {
            if g.nrows() != k || g.ncols() != k {
                return Err(invalid("G must be square over the targets"));
            }
            g.clone()
                .try_inverse()
                .ok_or_else(|| Error::Singular("gauge matrix G".into()))?
        }
    };
    let om_cols = analysis.omega_measured().transpose();
    Ok(ginv * r * -om_cols * &analysis.gamma_inv)
}

/// Precision achieved by measuring M⃗ = S·A⃗ (over measured observables) for
/// the generators R·A⃗: Cᵀ (S Γ Sᵀ)⁻¹ C with C = S Ω Rᵀ.
pub fn achieved_precision(analysis: &MomentAnalysis, s: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let c = s * analysis.omega_measured() * r.transpose();
    let gm = s * analysis.gamma_measured() * s.transpose();
    let (inv, _) = pinv_sym(&gm, REL_TOL);
    symmetrize(&(c.transpose() * inv * c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl LabeledMatrix {
    pub fn new(rows: Vec<String>, cols: Vec<String>, m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect();
        Self { rows, cols, data }
    }

    pub fn square(labels: &[String], m: &DMatrix<f64>) -> Self {
        Self::new(labels.to_vec(), labels.to_vec(), m)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.data.len()).map(|i| self.data[i][i]).collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        let nr = self.data.len();
        let nc = self.data.first().map_or(0, Vec::len);
        DMatrix::from_fn(nr, nc, |r, c| self.data[r][c])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub family: String,
    pub nbar: f64,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionReport {
    pub labels: Vec<String>,
    pub targets: Vec<String>,
    pub dropped: Vec<Dropped>,
    pub gamma: LabeledMatrix,
    pub omega: LabeledMatrix,
    pub moment: LabeledMatrix,
    pub precision_inv: LabeledMatrix,
    pub opt_obs: LabeledMatrix,
    pub qfim: Option<LabeledMatrix>,
    pub effective_rank: usize,
    pub meta: ReportMeta,
}

/// Full method-of-moments analysis of `obs` on `state` for the generators
/// named in `targets`.
pub fn analyze(
    state: &StateVector,
    obs: &ObservableVector,
    targets: &[&str],
    g: Option<&DMatrix<f64>>,
) -> Result<PrecisionReport> {
    let analysis = moment_matrix(state, obs)?;
    report_from_analysis(&analysis, targets, g, state, vec![0.0; targets.len()], true)
}

pub fn report_from_analysis(
    analysis: &MomentAnalysis,
    targets: &[&str],
    g: Option<&DMatrix<f64>>,
    state: &StateVector,
    theta: Vec<f64>,
    with_qfim: bool,
) -> Result<PrecisionReport> {
    let r = selection(&analysis.labels, targets)?;
    let prec = precision_matrix(analysis, &r)?;
    let s = optimal_observables(analysis, &r, g)?;
    let tl: Vec<String> = targets.iter().map(|t| t.to_string()).collect();
    let qfim = with_qfim.then(|| {
        let gsub = &r * &analysis.moments.gamma * r.transpose();
        LabeledMatrix::square(&tl, &(gsub * 4.0))
    });
    let labels = &analysis.labels;
    Ok(PrecisionReport {
        labels: labels.clone(),
        targets: tl.clone(),
        dropped: analysis.dropped.clone(),
        gamma: LabeledMatrix::square(labels, &analysis.moments.gamma),
        omega: LabeledMatrix::square(labels, &analysis.moments.omega),
        moment: LabeledMatrix::square(labels, &analysis.moment),
        precision_inv: LabeledMatrix::square(&tl, &prec),
        opt_obs: LabeledMatrix::new(tl, analysis.measured_labels(), &s),
        qfim,
        effective_rank: analysis.effective_rank,
        meta: ReportMeta {
            family: state.meta.family.clone(),
            nbar: state.meta.nbar,
            theta,
        },
    })
}
