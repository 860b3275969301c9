//! Probe states on truncated Fock bases.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::herm_eigen;
use crate::operators::{make_su2, FockBasis, ObservableVector, Operator};
use crate::sparse::CsrMatrix;

pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_CUTOFF: usize = 300;
/// Empty layers kept above the highest occupied one; quadratic operators
/// reach two layers up.
pub const CUTOFF_MARGIN: usize = 2;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `{"family": "...", "params": {...}, "tail_tol": 1e-12}`
///
/// Besides family parameters, `params` may carry `cutoff` (explicit N_max)
/// and `max_cutoff` (hard limit for automatic selection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tol: Option<f64>,
}

impl StateSpec {
    pub fn new(family: impl Into<String>) -> Self {
        Self {
            family: family.into(),
            params: BTreeMap::new(),
            tail_tol: None,
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    fn num(&self, key: &str) -> Result<f64> {
        self.params
            .get(key)
            .copied()
            .ok_or_else(|| invalid(format!("family `{}` needs parameter `{key}`", self.family)))
    }

    fn num_or(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn count(&self, key: &str) -> Result<usize> {
        as_count(key, self.num(key)?)
    }

    fn count_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            Some(&v) => as_count(key, v),
            None => Ok(default),
        }
    }
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v < 0.0 || v.fract() != 0.0 || !v.is_finite() {
        return Err(invalid(format!(
            "parameter `{key}` must be a nonnegative integer, got {v}"
        )));
    }
    Ok(v as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMeta {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub nbar: f64,
    pub sector_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "StateRecord", try_from = "StateRecord")]
pub struct StateVector {
    basis: FockBasis,
    amplitudes: DVector<Complex64>,
    pub meta: StateMeta,
    tail_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct StateRecord {
    basis: FockBasis,
    amplitudes: Vec<[f64; 2]>,
    meta: StateMeta,
    tail_tol: f64,
}

impl From<StateVector> for StateRecord {
    fn from(s: StateVector) -> Self {
        Self {
            basis: s.basis,
            amplitudes: s.amplitudes.iter().map(|z| [z.re, z.im]).collect(),
            meta: s.meta,
            tail_tol: s.tail_tol,
        }
    }
}

impl TryFrom<StateRecord> for StateVector {
    type Error = Error;
    fn try_from(r: StateRecord) -> Result<Self> {
        if r.amplitudes.len() != r.basis.dim() {
            return Err(invalid("amplitude count does not match basis dimension"));
        }
        let amps = DVector::from_iterator(
            r.amplitudes.len(),
            r.amplitudes.iter().map(|p| Complex64::new(p[0], p[1])),
        );
        Ok(Self {
            basis: r.basis,
            amplitudes: amps,
            meta: r.meta,
            tail_tol: r.tail_tol,
        })
    }
}

impl StateVector {
    /// Wraps raw amplitudes; normalizes and fills `nbar`/`sector_m` numerically.
    pub fn from_amplitudes(
        basis: FockBasis,
        amplitudes: DVector<Complex64>,
        family: impl Into<String>,
    ) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(invalid("amplitude count does not match basis dimension"));
        }
        let norm = amplitudes.norm();
        if norm == 0.0 {
            return Err(invalid("zero state vector"));
        }
        let mut s = Self {
            basis,
            amplitudes: amplitudes / Complex64::new(norm, 0.0),
            meta: StateMeta {
                family: family.into(),
                params: BTreeMap::new(),
                nbar: 0.0,
                sector_m: None,
            },
            tail_tol: DEFAULT_TAIL_TOL,
        };
        s.refresh_meta();
        Ok(s)
    }

    fn refresh_meta(&mut self) {
        self.meta.nbar = self.mean_number();
        self.meta.sector_m = self.numeric_sector();
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn tail_tol(&self) -> f64 {
        self.tail_tol
    }

    pub fn with_tail_tol(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Weight on basis states with some mode within `depth` layers of the cutoff.
    pub fn edge_mass(&self, depth: usize) -> f64 {
        (0..self.basis.dim())
            .filter(|&i| self.basis.near_edge(i, depth))
            .map(|i| self.amplitudes[i].norm_sqr())
            .sum()
    }

    pub fn edge_mass_modes(&self, depth: [usize; 2]) -> f64 {
        (0..self.basis.dim())
            .filter(|&i| self.basis.near_edge_modes(i, depth))
            .map(|i| self.amplitudes[i].norm_sqr())
            .sum()
    }

    /// Weight on the top Fock layer.
    pub fn tail_mass(&self) -> f64 {
        self.edge_mass(1)
    }

    pub fn mean_number(&self) -> f64 {
        (0..self.basis.dim())
            .map(|i| self.amplitudes[i].norm_sqr() * self.basis.total(i) as f64)
            .sum()
    }

    pub fn number_variance(&self) -> f64 {
        let m2: f64 = (0..self.basis.dim())
            .map(|i| self.amplitudes[i].norm_sqr() * (self.basis.total(i) as f64).powi(2))
            .sum();
        m2 - self.mean_number().powi(2)
    }

    fn numeric_sector(&self) -> Option<f64> {
        if self.basis.modes != 2 {
            return None;
        }
        Some(
            (0..self.basis.dim())
                .map(|i| {
                    let o = self.basis.occupations(i);
                    self.amplitudes[i].norm_sqr() * (o[0] as f64 - o[1] as f64) / 2.0
                })
                .sum(),
        )
    }

    fn check_basis(&self, op: &Operator) -> Result<()> {
        if op.basis() != self.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.to_string(),
                right: op.basis().to_string(),
            });
        }
        Ok(())
    }

    /// `op |ψ⟩`, refusing when the operator could leave the truncated space
    /// from a layer that carries more than `tail_tol` weight.
    pub fn apply_checked(&self, op: &Operator) -> Result<DVector<Complex64>> {
        self.check_basis(op)?;
        if op.truncation_affected() {
            let mass = self.edge_mass_modes(op.mode_reach());
            if mass > self.tail_tol {
                return Err(Error::Truncation {
                    mass,
                    tol: self.tail_tol,
                    context: format!("applying `{}` on {}", op.label(), self.basis),
                });
            }
        }
        Ok(op.matrix().apply(&self.amplitudes))
    }

    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }
}

/// ⟨ψ|op|ψ⟩
pub fn expectation(state: &StateVector, op: &Operator) -> Result<Complex64> {
    let v = state.apply_checked(op)?;
    Ok(state.amplitudes.dotc(&v))
}

pub fn variance(state: &StateVector, op: &Operator) -> Result<f64> {
    let v = state.apply_checked(op)?;
    let mean = state.amplitudes.dotc(&v).re;
    Ok(v.norm_squared() - mean * mean)
}

/// Block-wise `exp(-i θ·H)` for Hermitian generators.
pub fn evolve(state: &StateVector, generators: &ObservableVector, theta: &[f64]) -> Result<StateVector> {
    if theta.len() != generators.len() {
        return Err(invalid(format!(
            "theta has {} entries for {} generators",
            theta.len(),
            generators.len()
        )));
    }
    let mut h = CsrMatrix::zeros(state.basis.dim());
    let mut reach = 0;
    for (op, &t) in generators.entries().iter().zip(theta) {
        state.check_basis(op)?;
        if !op.is_hermitian() {
            return Err(Error::NotHermitian(
                op.label().to_string(),
                op.matrix().hermitian_defect(),
            ));
        }
        if t != 0.0 {
            h = h.axpby(Complex64::new(1.0, 0.0), op.matrix(), Complex64::new(t, 0.0));
            reach = reach.max(op.reach());
        }
    }
    let psi = &state.amplitudes;
    let mut out = DVector::zeros(psi.len());
    for block in h.components() {
        if block.iter().all(|&i| psi[i] == ZERO) {
            continue;
        }
        if block.len() == 1 {
            let i = block[0];
            out[i] = psi[i] * (-Complex64::i() * h.get(i, i)).exp();
            continue;
        }
        let dense = h.block(&block);
        let (vals, vecs) = herm_eigen(&dense);
        let sub = DVector::from_iterator(block.len(), block.iter().map(|&i| psi[i]));
        let mut coeff = vecs.adjoint() * sub;
        for (k, c) in coeff.iter_mut().enumerate() {
            *c *= Complex64::new(0.0, -vals[k]).exp();
        }
        let res = vecs * coeff;
        for (p, &i) in block.iter().enumerate() {
            out[i] = res[p];
        }
    }
    let mut next = StateVector {
        basis: state.basis,
        amplitudes: out,
        meta: state.meta.clone(),
        tail_tol: state.tail_tol,
    };
    if reach > 0 {
        let mass = next.tail_mass();
        if mass > state.tail_tol {
            return Err(Error::Truncation {
                mass,
                tol: state.tail_tol,
                context: "after evolution".into(),
            });
        }
    }
    next.refresh_meta();
    Ok(next)
}

/// Family names accepted by [`make_state`].
pub const FAMILIES: &[&str] = &[
    "fock",
    "twin_fock",
    "noon",
    "noon_bare",
    "psi_k",
    "psi_k_optimal",
    "su11_psi_tilde",
    "zero_nn",
    "zero_n_product",
    "triple_noon",
    "coherent",
    "single_mode_squeezed",
    "two_mode_squeezed",
    "cat",
    "hw_vacuum",
    "hw_coherent",
    "hw_squeezed",
];

/// Index of the closest integer to √(n(n+2)/3).
pub fn psi_k_optimal_index(n: usize) -> usize {
    ((n * (n + 2)) as f64 / 3.0).sqrt().round() as usize
}

pub fn make_state(spec: &StateSpec) -> Result<StateVector> {
    let tol = spec.tail_tol.unwrap_or(DEFAULT_TAIL_TOL);
    if !(tol > 0.0) {
        return Err(invalid("tail_tol must be positive"));
    }
    let mut state = match spec.family.as_str() {
        "fock" => {
            let n1 = match spec.params.get("n1") {
                Some(&v) => as_count("n1", v)?,
                None => spec.count("n")?,
            };
            let n2 = spec.count_or("n2", 0)?;
            let b = fixed_basis(spec, 2, n1.max(n2))?;
            terms(b, &[(&[n1, n2], 1.0)], spec)?
        }
        "twin_fock" => {
            let n = spec.count("n")?;
            require_even(n, "twin_fock")?;
            let b = fixed_basis(spec, 2, n / 2)?;
            terms(b, &[(&[n / 2, n / 2], 1.0)], spec)?
        }
        "noon_bare" => {
            let n = spec.count("n")?;
            let b = fixed_basis(spec, 2, n)?;
            noon_bare(b, n, spec)?
        }
        "noon" => {
            let n = spec.count("n")?;
            let b = fixed_basis(spec, 2, n)?;
            let bare = noon_bare(b, n, spec)?;
            evolve(&bare, &make_su2(b)?, &[FRAC_PI_2, 0.0, 0.0])?
        }
        "triple_noon" => {
            let n = spec.count("n")?;
            let b = fixed_basis(spec, 2, n)?;
            let j = make_su2(b)?;
            let z = noon_bare(b, n, spec)?;
            let x = evolve(&z, &j, &[0.0, FRAC_PI_2, 0.0])?;
            let y = evolve(&z, &j, &[-FRAC_PI_2, 0.0, 0.0])?;
            let sum = &z.amplitudes + &x.amplitudes + &y.amplitudes;
            StateVector::from_amplitudes(b, sum, "triple_noon")?
        }
        "psi_k" | "psi_k_optimal" => {
            let n = spec.count("n")?;
            let k = if spec.family == "psi_k" {
                spec.count("k")?
            } else {
                psi_k_optimal_index(n)
            };
            if k > n {
                return Err(invalid(format!("k={k} out of range [0, {n}]")));
            }
            let b = fixed_basis(spec, 2, n)?;
            terms(b, &[(&[n - k, k], 1.0), (&[k, n - k], 1.0)], spec)?
        }
        "su11_psi_tilde" => {
            let n = spec.count("n")?;
            require_even(n, "su11_psi_tilde")?;
            let k = spec.count("k")?;
            let h = n / 2;
            let b = fixed_basis(spec, 2, h + k)?;
            terms(b, &[(&[h, h], 1.0), (&[h + k, h + k], 1.0)], spec)?
        }
        "zero_nn" => {
            let n = spec.count("n")?;
            let b = fixed_basis(spec, 2, n)?;
            terms(b, &[(&[0, 0], 1.0), (&[n, n], 1.0)], spec)?
        }
        "zero_n_product" => {
            let n = spec.count("n")?;
            let b = fixed_basis(spec, 2, n)?;
            terms(
                b,
                &[(&[0, 0], 1.0), (&[0, n], 1.0), (&[n, 0], 1.0), (&[n, n], 1.0)],
                spec,
            )?
        }
        "coherent" => {
            let alpha = Complex64::new(spec.num("alpha")?, spec.num_or("alpha_im", 0.0));
            let mode = spec.count_or("mode", 0)?;
            if mode > 1 {
                return Err(invalid(format!("mode {mode} out of range for two modes")));
            }
            let dist = coherent_amplitudes(alpha, usize::MAX);
            let b = indefinite_basis(spec, 2, &dist, tol)?;
            single_mode_profile(b, mode, &coherent_amplitudes(alpha, b.cutoff))?
        }
        "single_mode_squeezed" => {
            let r = spec.num("r")?;
            let amp = squeezed_amplitudes((r / 2.0).tanh(), (r / 2.0).cosh(), usize::MAX);
            let b = indefinite_basis(spec, 2, &amp, tol)?;
            let amp = squeezed_amplitudes((r / 2.0).tanh(), (r / 2.0).cosh(), b.cutoff);
            single_mode_profile(b, 0, &amp)?
        }
        "two_mode_squeezed" => {
            let zeta = spec.num("zeta")?;
            let q = -(zeta / 2.0).tanh();
            let amp = geometric_amplitudes(q, usize::MAX);
            let b = indefinite_basis(spec, 2, &amp, tol)?;
            let amp = geometric_amplitudes(q, b.cutoff);
            let mut v = DVector::zeros(b.dim());
            for (n, &a) in amp.iter().enumerate() {
                v[b.index(&[n, n])] = a;
            }
            StateVector::from_amplitudes(b, v, "two_mode_squeezed")?
        }
        "cat" => {
            let alpha = Complex64::new(spec.num("alpha")?, spec.num_or("alpha_im", 0.0));
            let amp = cat_amplitudes(alpha, usize::MAX);
            let b = indefinite_basis(spec, 2, &amp, tol)?;
            single_mode_profile(b, 0, &cat_amplitudes(alpha, b.cutoff))?
        }
        "hw_vacuum" => {
            let b = fixed_basis(spec, 1, 0)?;
            terms(b, &[(&[0], 1.0)], spec)?
        }
        "hw_coherent" => {
            let alpha = Complex64::new(spec.num("alpha")?, spec.num_or("alpha_im", 0.0));
            let amp = coherent_amplitudes(alpha, usize::MAX);
            let b = indefinite_basis(spec, 1, &amp, tol)?;
            single_mode_profile(b, 0, &coherent_amplitudes(alpha, b.cutoff))?
        }
        "hw_squeezed" => {
            let xi = spec.num("xi")?;
            let amp = squeezed_amplitudes(-xi.tanh(), xi.cosh(), usize::MAX);
            let b = indefinite_basis(spec, 1, &amp, tol)?;
            single_mode_profile(b, 0, &squeezed_amplitudes(-xi.tanh(), xi.cosh(), b.cutoff))?
        }
        other => return Err(invalid(format!("unknown state family `{other}`"))),
    };
    state.tail_tol = tol;
    state.meta.family = spec.family.clone();
    state.meta.params = spec.params.clone();
    if let Some(nbar) = analytic_nbar(spec)? {
        state.meta.nbar = nbar;
    }
    let mass = state.tail_mass();
    if mass > tol {
        return Err(Error::Truncation {
            mass,
            tol,
            context: format!("constructing `{}`", spec.family),
        });
    }
    Ok(state)
}

fn analytic_nbar(spec: &StateSpec) -> Result<Option<f64>> {
    Ok(match spec.family.as_str() {
        "coherent" | "hw_coherent" => Some(Complex64::new(spec.num("alpha")?, spec.num_or("alpha_im", 0.0)).norm_sqr()),
        "single_mode_squeezed" => Some((spec.num("r")? / 2.0).sinh().powi(2)),
        "two_mode_squeezed" => Some(2.0 * (spec.num("zeta")? / 2.0).sinh().powi(2)),
        "hw_squeezed" => Some(spec.num("xi")?.sinh().powi(2)),
        "cat" => {
            let a2 = Complex64::new(spec.num("alpha")?, spec.num_or("alpha_im", 0.0)).norm_sqr();
            Some(a2 * a2.tanh())
        }
        _ => None,
    })
}

fn require_even(n: usize, family: &str) -> Result<()> {
    if n % 2 != 0 {
        return Err(invalid(format!("{family} requires even n, got {n}")));
    }
    Ok(())
}

fn cutoff_limit(spec: &StateSpec) -> Result<usize> {
    spec.count_or("max_cutoff", DEFAULT_MAX_CUTOFF)
}

fn fixed_basis(spec: &StateSpec, modes: usize, max_occ: usize) -> Result<FockBasis> {
    let cutoff = match spec.params.get("cutoff") {
        Some(&v) => {
            let c = as_count("cutoff", v)?;
            if c < max_occ + 1 {
                return Err(Error::CutoffInsufficient {
                    family: spec.family.clone(),
                    have: c,
                    required: max_occ + 1,
                });
            }
            c
        }
        None => max_occ + CUTOFF_MARGIN,
    };
    FockBasis::new(modes, cutoff)
}

/// Picks N_max so the analytic weight on occupations ≥ N_max − 1 of the
/// profiled mode is below `tol`.
fn indefinite_basis(spec: &StateSpec, modes: usize, amp: &[Complex64], tol: f64) -> Result<FockBasis> {
    let mut suffix = vec![0.0; amp.len() + 1];
    for k in (0..amp.len()).rev() {
        suffix[k] = suffix[k + 1] + amp[k].norm_sqr();
    }
    let total = suffix[0];
    let first = (0..=amp.len()).find(|&m| suffix[m] / total < tol).unwrap_or(amp.len());
    let required = first + 1;
    let limit = cutoff_limit(spec)?;
    match spec.params.get("cutoff") {
        Some(&v) => {
            let c = as_count("cutoff", v)?;
            if c < required {
                return Err(Error::CutoffInsufficient {
                    family: spec.family.clone(),
                    have: c,
                    required,
                });
            }
            FockBasis::new(modes, c)
        }
        None => {
            if required > limit {
                return Err(Error::CutoffLimit {
                    family: spec.family.clone(),
                    required,
                    limit,
                });
            }
            FockBasis::new(modes, required)
        }
    }
}

const PROFILE_TERMS: usize = 20_000;
const PROFILE_FLOOR: f64 = 1e-40;

/// Runs a term recursion up to `max_n`, or with `usize::MAX` until terms are
/// negligible past the peak.
fn run_profile(max_n: usize, mut next: impl FnMut(usize, Complex64) -> Complex64, first: Complex64) -> Vec<Complex64> {
    let mut out = vec![first];
    let mut peak = first.norm();
    let mut k = 1;
    loop {
        if max_n != usize::MAX && k > max_n {
            break;
        }
        if max_n == usize::MAX {
            let recent = out[k - 1].norm().max(out[k.saturating_sub(2)].norm());
            if k >= PROFILE_TERMS || (k > 2 && recent < PROFILE_FLOOR * peak) {
                break;
            }
        }
        let v = next(k, out[k - 1]);
        peak = peak.max(v.norm());
        out.push(v);
        k += 1;
    }
    out
}

fn coherent_amplitudes(alpha: Complex64, max_n: usize) -> Vec<Complex64> {
    let first = Complex64::new((-alpha.norm_sqr() / 2.0).exp(), 0.0);
    run_profile(max_n, |k, prev| prev * alpha / (k as f64).sqrt(), first)
}

fn cat_amplitudes(alpha: Complex64, max_n: usize) -> Vec<Complex64> {
    coherent_amplitudes(alpha, max_n)
        .into_iter()
        .enumerate()
        .map(|(k, a)| if k % 2 == 0 { a } else { ZERO })
        .collect()
}

/// c_{2m} = t^m √((2m)!)/(2^m m!) / √ch, odd terms zero.
fn squeezed_amplitudes(t: f64, ch: f64, max_n: usize) -> Vec<Complex64> {
    let first = Complex64::new(1.0 / ch.sqrt(), 0.0);
    let mut even = first;
    run_profile(
        max_n,
        |k, _| {
            if k % 2 == 1 {
                return ZERO;
            }
            let kk = k as f64;
            even *= t * ((kk - 1.0) / kk).sqrt();
            even
        },
        first,
    )
    .into_iter()
    .enumerate()
    .map(|(k, a)| if k % 2 == 0 { a } else { ZERO })
    .collect()
}

fn geometric_amplitudes(q: f64, max_n: usize) -> Vec<Complex64> {
    let first = Complex64::new((1.0 - q * q).sqrt(), 0.0);
    run_profile(max_n, |_, prev| prev * q, first)
}

fn single_mode_profile(b: FockBasis, mode: usize, amp: &[Complex64]) -> Result<StateVector> {
    let mut v = DVector::zeros(b.dim());
    for (k, &a) in amp.iter().enumerate().take(b.cutoff + 1) {
        let mut occ = vec![0; b.modes];
        occ[mode] = k;
        v[b.index(&occ)] = a;
    }
    StateVector::from_amplitudes(b, v, "profile")
}

fn terms(b: FockBasis, list: &[(&[usize], f64)], spec: &StateSpec) -> Result<StateVector> {
    let mut v = DVector::zeros(b.dim());
    for (occ, w) in list {
        v[b.index(occ)] += Complex64::new(*w, 0.0);
    }
    StateVector::from_amplitudes(b, v, spec.family.clone())
}

fn noon_bare(b: FockBasis, n: usize, spec: &StateSpec) -> Result<StateVector> {
    terms(b, &[(&[n, 0], 1.0), (&[0, n], 1.0)], spec)
}

/// Dense outer product |ψ⟩⟨ψ|, for small tests and mixtures.
pub fn projector(state: &StateVector) -> DMatrix<Complex64> {
    &state.amplitudes * state.amplitudes.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::make_su11_two_mode;

    fn st(family: &str, kv: &[(&str, f64)]) -> StateVector {
        let mut s = StateSpec::new(family);
        for (k, v) in kv {
            s = s.with(k, *v);
        }
        make_state(&s).unwrap()
    }

    #[test]
    fn degenerate_psi_k_is_single_term() {
        let s = st("psi_k", &[("n", 4.0), ("k", 2.0)]);
        let b = s.basis();
        assert!((s.amplitudes()[b.index(&[2, 2])].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_parameters() {
        assert!(make_state(&StateSpec::new("twin_fock").with("n", 3.0)).is_err());
        assert!(make_state(&StateSpec::new("psi_k").with("n", 4.0).with("k", 5.0)).is_err());
        assert!(make_state(&StateSpec::new("nope")).is_err());
        let e = make_state(&StateSpec::new("fock").with("n", 4.0).with("cutoff", 3.0)).unwrap_err();
        assert!(matches!(e, Error::CutoffInsufficient { required: 5, .. }));
    }

    #[test]
    fn cutoff_limit_names_requirement() {
        let spec = StateSpec::new("two_mode_squeezed")
            .with("zeta", 3.0)
            .with("max_cutoff", 20.0);
        match make_state(&spec).unwrap_err() {
            Error::CutoffLimit { required, limit, .. } => {
                assert!(required > 20);
                assert_eq!(limit, 20);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn optimal_index() {
        assert_eq!(psi_k_optimal_index(4), 3);
        assert_eq!(psi_k_optimal_index(10), 6);
    }

    #[test]
    fn tmsv_matches_evolution() {
        let zeta = 0.7;
        let s = make_state(
            &StateSpec::new("two_mode_squeezed")
                .with("zeta", zeta)
                .with("cutoff", 60.0),
        )
        .unwrap();
        let vac = make_state(&StateSpec::new("fock").with("n", 0.0).with("cutoff", 60.0)).unwrap();
        let k = make_su11_two_mode(vac.basis()).unwrap();
        let ev = evolve(&vac, &k, &[0.0, zeta, 0.0]).unwrap();
        assert!((ev.fidelity(&s) - 1.0).abs() < 1e-10);
        let overlap = ev.amplitudes().dotc(s.amplitudes());
        assert!((overlap.re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn evolution_truncation_detected() {
        let vac = make_state(&StateSpec::new("fock").with("n", 0.0)).unwrap();
        let k = make_su11_two_mode(vac.basis()).unwrap();
        assert!(matches!(
            evolve(&vac, &k, &[0.5, 0.0, 0.0]),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let s = st("psi_k", &[("n", 3.0), ("k", 1.0)]);
        let text = serde_json::to_string(&s).unwrap();
        let back: StateVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let spec: StateSpec = serde_json::from_str(r#"{"family":"noon","params":{"n":3}}"#).unwrap();
        assert_eq!(spec.family, "noon");
    }
}
