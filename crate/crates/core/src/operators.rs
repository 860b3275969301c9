//! Truncated bosonic Fock spaces and the operator algebras built on them.
//!
//! Basis ordering is row-major over occupations with the last mode fastest:
//! index = n1 * (N_max + 1) + n2 for two modes.

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::sparse::CsrMatrix;

const HERMITIAN_TOL: f64 = 1e-12;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockBasis {
    pub modes: usize,
    pub cutoff: usize,
}

impl FockBasis {
    pub fn new(modes: usize, cutoff: usize) -> Result<Self> {
        if modes != 1 && modes != 2 {
            return Err(invalid(format!("modes must be 1 or 2, got {modes}")));
        }
        Ok(Self { modes, cutoff })
    }

    pub fn single(cutoff: usize) -> Self {
        Self { modes: 1, cutoff }
    }

    pub fn two_mode(cutoff: usize) -> Self {
        Self { modes: 2, cutoff }
    }

    pub fn dim(&self) -> usize {
        (self.cutoff + 1).pow(self.modes as u32)
    }

    pub fn index(&self, occ: &[usize]) -> usize {
        assert_eq!(occ.len(), self.modes);
        occ.iter().fold(0, |acc, &n| {
            assert!(n <= self.cutoff);
            acc * (self.cutoff + 1) + n
        })
    }

    pub fn occupations(&self, idx: usize) -> Vec<usize> {
        let base = self.cutoff + 1;
        let mut out = vec![0; self.modes];
        let mut r = idx;
        for m in (0..self.modes).rev() {
            out[m] = r % base;
            r /= base;
        }
        out
    }

    pub fn total(&self, idx: usize) -> usize {
        self.occupations(idx).iter().sum()
    }

    /// True when some mode's occupation exceeds `N_max - depth`.
    pub fn near_edge(&self, idx: usize, depth: usize) -> bool {
        self.near_edge_modes(idx, [depth; 2])
    }

    /// Like `near_edge` with a separate depth per mode.
    pub fn near_edge_modes(&self, idx: usize, depth: [usize; 2]) -> bool {
        self.occupations(idx)
            .iter()
            .zip(depth)
            .any(|(&n, d)| d > 0 && n + d > self.cutoff)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(invalid(format!(
                "mode {mode} out of range for {}-mode basis",
                self.modes
            )));
        }
        Ok(())
    }
}

impl fmt::Display for FockBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fock(modes={}, N_max={})", self.modes, self.cutoff)
    }
}

/// A matrix on a truncated Fock basis.
///
/// `reach` bounds, per mode, how many quanta the operator can add. An
/// operator with nonzero reach loses matrix elements at the cutoff, so its
/// action is exact only on vectors with no weight within `reach` layers of
/// the edge.
#[derive(Debug, Clone)]
pub struct Operator {
    basis: FockBasis,
    matrix: CsrMatrix,
    label: String,
    hermitian: bool,
    reach: [usize; 2],
}

impl Operator {
    pub fn new(basis: FockBasis, matrix: CsrMatrix, label: impl Into<String>, reach: usize) -> Result<Self> {
        if matrix.dim() != basis.dim() {
            return Err(invalid(format!(
                "matrix dimension {} does not match {basis}",
                matrix.dim()
            )));
        }
        let hermitian = matrix.hermitian_defect() <= HERMITIAN_TOL;
        Ok(Self {
            basis,
            matrix,
            label: label.into(),
            hermitian,
            reach: [reach; 2],
        })
    }

    pub fn from_dense(
        basis: FockBasis,
        m: &DMatrix<Complex64>,
        label: impl Into<String>,
        reach: usize,
    ) -> Result<Self> {
        let t = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .filter(|&(i, j)| m[(i, j)] != c(0.0))
            .map(|(i, j)| (i, j, m[(i, j)]))
            .collect();
        Self::new(basis, CsrMatrix::from_triplets(m.nrows(), t), label, reach)
    }

    pub fn identity(basis: FockBasis) -> Self {
        Self::new(basis, CsrMatrix::identity(basis.dim()), "1", 0).unwrap()
    }

    pub fn basis(&self) -> FockBasis {
        self.basis
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        self.matrix.to_dense()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Largest per-mode reach.
    pub fn reach(&self) -> usize {
        self.reach[0].max(self.reach[1])
    }

    pub fn mode_reach(&self) -> [usize; 2] {
        self.reach
    }

    fn with_reach(mut self, reach: [usize; 2]) -> Self {
        self.reach = reach;
        self
    }

    pub fn truncation_affected(&self) -> bool {
        self.reach() > 0
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    fn same_basis(&self, other: &Operator) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.to_string(),
                right: other.basis.to_string(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Operator) -> Result<Operator> {
        self.same_basis(other)?;
        Operator::new(
            self.basis,
            self.matrix.matmul(&other.matrix),
            format!("{}{}", self.label, other.label),
            0,
        )
        .map(|o| o.with_reach([self.reach[0] + other.reach[0], self.reach[1] + other.reach[1]]))
    }

    /// `a * self + b * other`
    pub fn combine(&self, a: Complex64, other: &Operator, b: Complex64) -> Result<Operator> {
        self.same_basis(other)?;
        Operator::new(
            self.basis,
            self.matrix.axpby(a, &other.matrix, b),
            format!("{}+{}", self.label, other.label),
            0,
        )
        .map(|o| o.with_reach([self.reach[0].max(other.reach[0]), self.reach[1].max(other.reach[1])]))
    }

    pub fn add(&self, other: &Operator) -> Result<Operator> {
        self.combine(c(1.0), other, c(1.0))
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator> {
        self.combine(c(1.0), other, c(-1.0))
    }

    pub fn scale(&self, s: Complex64) -> Operator {
        Operator::new(self.basis, self.matrix.scale(s), self.label.clone(), 0)
            .unwrap()
            .with_reach(self.reach)
    }

    pub fn adjoint(&self) -> Operator {
        Operator::new(self.basis, self.matrix.adjoint(), format!("{}^†", self.label), 0)
            .unwrap()
            .with_reach(self.reach)
    }

    pub fn commutator(&self, other: &Operator) -> Result<Operator> {
        let ab = self.mul(other)?;
        let ba = other.mul(self)?;
        Ok(ab.sub(&ba)?.with_label(format!("[{},{}]", self.label, other.label)))
    }

    pub fn anticommutator(&self, other: &Operator) -> Result<Operator> {
        let ab = self.mul(other)?;
        let ba = other.mul(self)?;
        Ok(ab.add(&ba)?.with_label(format!("{{{},{}}}", self.label, other.label)))
    }

    /// Linear combination `Σ w_k O_k` with real weights.
    pub fn linear_combination(ops: &[&Operator], weights: &[f64], label: impl Into<String>) -> Result<Operator> {
        if ops.is_empty() || ops.len() != weights.len() {
            return Err(invalid("linear combination needs matching nonempty lists"));
        }
        let mut acc = ops[0].scale(c(weights[0]));
        for (op, &w) in ops.iter().zip(weights).skip(1) {
            acc = acc.combine(c(1.0), op, c(w))?;
        }
        Ok(acc.with_label(label))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgebraKind {
    Su2,
    Su11,
    Su11Single,
    Quadratures,
    Custom,
}

/// Ordered list of operators sharing one basis, with unique labels.
#[derive(Debug, Clone)]
pub struct ObservableVector {
    entries: Vec<Operator>,
    kind: AlgebraKind,
}

impl ObservableVector {
    pub fn new(entries: Vec<Operator>, kind: AlgebraKind) -> Result<Self> {
        if let Some(first) = entries.first() {
            for e in &entries[1..] {
                first.same_basis(e)?;
            }
        }
        for (i, a) in entries.iter().enumerate() {
            if entries[..i].iter().any(|b| b.label == a.label) {
                return Err(invalid(format!("duplicate observable label `{}`", a.label)));
            }
        }
        Ok(Self { entries, kind })
    }

    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Operator] {
        &self.entries
    }

    pub fn get(&self, i: usize) -> &Operator {
        &self.entries[i]
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.clone()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.label == label)
    }

    pub fn by_label(&self, label: &str) -> Result<&Operator> {
        self.position(label)
            .map(|i| &self.entries[i])
            .ok_or_else(|| invalid(format!("no observable labelled `{label}`")))
    }

    pub fn basis(&self) -> Option<FockBasis> {
        self.entries.first().map(|e| e.basis)
    }

    /// Sub-vector with the given labels, in the given order.
    pub fn select(&self, labels: &[&str]) -> Result<ObservableVector> {
        let entries = labels
            .iter()
            .map(|l| self.by_label(l).cloned())
            .collect::<Result<Vec<_>>>()?;
        ObservableVector::new(entries, AlgebraKind::Custom)
    }

    pub fn concat(&self, other: &ObservableVector) -> Result<ObservableVector> {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        ObservableVector::new(entries, AlgebraKind::Custom)
    }

    /// Rows of `t` give new observables as real combinations of the entries.
    pub fn transform(&self, t: &DMatrix<f64>, labels: &[String]) -> Result<ObservableVector> {
        if t.ncols() != self.len() || t.nrows() != labels.len() {
            return Err(invalid("transform shape does not match observable vector"));
        }
        let refs: Vec<&Operator> = self.entries.iter().collect();
        let entries = (0..t.nrows())
            .map(|r| {
                let w: Vec<f64> = t.row(r).iter().copied().collect();
                Operator::linear_combination(&refs, &w, labels[r].clone())
            })
            .collect::<Result<Vec<_>>>()?;
        ObservableVector::new(entries, AlgebraKind::Custom)
    }
}

/// Annihilation and creation operators on one mode.
pub fn make_mode_ops(basis: FockBasis, mode: usize) -> Result<(Operator, Operator)> {
    basis.check_mode(mode)?;
    let dim = basis.dim();
    let mut t = Vec::with_capacity(dim);
    for idx in 0..dim {
        let mut occ = basis.occupations(idx);
        let n = occ[mode];
        if n > 0 {
            occ[mode] = n - 1;
            t.push((basis.index(&occ), idx, c((n as f64).sqrt())));
        }
    }
    let a = CsrMatrix::from_triplets(dim, t);
    let ad = a.adjoint();
    let mut raise = [0; 2];
    raise[mode] = 1;
    let suffix = if basis.modes == 1 {
        String::new()
    } else {
        format!("{}", mode + 1)
    };
    Ok((
        Operator::new(basis, a, format!("a{suffix}"), 0)?,
        Operator::new(basis, ad, format!("a{suffix}^†"), 0)?.with_reach(raise),
    ))
}

fn number_op(basis: FockBasis, mode: usize) -> Operator {
    let d: Vec<Complex64> = (0..basis.dim()).map(|i| c(basis.occupations(i)[mode] as f64)).collect();
    Operator::new(basis, CsrMatrix::diagonal(&d), "n", 0).unwrap()
}

fn require_two_modes(basis: FockBasis, what: &str) -> Result<()> {
    if basis.modes != 2 {
        return Err(invalid(format!("{what} requires a two-mode basis, got {basis}")));
    }
    Ok(())
}

/// Jordan-Schwinger spin operators (Jx, Jy, Jz).
pub fn make_su2(basis: FockBasis) -> Result<ObservableVector> {
    require_two_modes(basis, "su(2)")?;
    let (a1, a1d) = make_mode_ops(basis, 0)?;
    let (a2, a2d) = make_mode_ops(basis, 1)?;
    let hop = a1d.mul(&a2)?;
    let hop_back = a1.mul(&a2d)?;
    let jx = hop.combine(c(0.5), &hop_back, c(0.5))?.with_label("Jx");
    let jy = hop.combine(-0.5 * I, &hop_back, 0.5 * I)?.with_label("Jy");
    let jz = number_op(basis, 0)
        .combine(c(0.5), &number_op(basis, 1), c(-0.5))?
        .with_label("Jz");
    ObservableVector::new(vec![jx, jy, jz], AlgebraKind::Su2)
}

/// Two-mode squeezing generators (Kx, Ky, Kz).
pub fn make_su11_two_mode(basis: FockBasis) -> Result<ObservableVector> {
    require_two_modes(basis, "two-mode su(1,1)")?;
    let (a1, a1d) = make_mode_ops(basis, 0)?;
    let (a2, a2d) = make_mode_ops(basis, 1)?;
    let create = a1d.mul(&a2d)?;
    let destroy = a1.mul(&a2)?;
    let kx = create.combine(c(0.5), &destroy, c(0.5))?.with_label("Kx");
    let ky = create.combine(-0.5 * I, &destroy, 0.5 * I)?.with_label("Ky");
    let n = number_op(basis, 0).add(&number_op(basis, 1))?;
    let kz = Operator::identity(basis).combine(c(0.5), &n, c(0.5))?.with_label("Kz");
    ObservableVector::new(vec![kx, ky, kz], AlgebraKind::Su11)
}

/// Single-mode squeezing generators (Lx, Ly, Lz) on one mode.
pub fn make_su11_single_mode(basis: FockBasis, mode: usize) -> Result<ObservableVector> {
    let (a, ad) = make_mode_ops(basis, mode)?;
    let create = ad.mul(&ad)?;
    let destroy = a.mul(&a)?;
    let lx = create.combine(c(0.25), &destroy, c(0.25))?.with_label("Lx");
    let ly = create.combine(-0.25 * I, &destroy, 0.25 * I)?.with_label("Ly");
    let lz = Operator::identity(basis)
        .combine(c(0.25), &number_op(basis, mode), c(0.5))?
        .with_label("Lz");
    ObservableVector::new(vec![lx, ly, lz], AlgebraKind::Su11Single)
}

/// Canonical quadratures x = (a + a†)/√2, p = (a − a†)/(i√2).
pub fn make_quadratures(basis: FockBasis) -> Result<ObservableVector> {
    if basis.modes != 1 {
        return Err(invalid(format!("quadratures require a single-mode basis, got {basis}")));
    }
    let (a, ad) = make_mode_ops(basis, 0)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = a.combine(c(s), &ad, c(s))?.with_label("x");
    let p = a.combine(-I * s, &ad, I * s)?.with_label("p");
    ObservableVector::new(vec![x, p], AlgebraKind::Quadratures)
}

fn square_label(l: &str) -> String {
    format!("{l}^2")
}

/// (G1², G2², G3², {G2,G3}, {G1,G3}, {G1,G2})
pub fn quadratic_extension(base: &ObservableVector) -> Result<ObservableVector> {
    if base.len() != 3 {
        return Err(invalid(format!(
            "quadratic extension needs 3 generators, got {}",
            base.len()
        )));
    }
    let g = base.entries();
    let sq = |k: usize| -> Result<Operator> { Ok(g[k].mul(&g[k])?.with_label(square_label(g[k].label()))) };
    let entries = vec![
        sq(0)?,
        sq(1)?,
        sq(2)?,
        g[1].anticommutator(&g[2])?,
        g[0].anticommutator(&g[2])?,
        g[0].anticommutator(&g[1])?,
    ];
    ObservableVector::new(entries, AlgebraKind::Custom)
}

/// Generators followed by their quadratic extension; keeps the algebra kind
/// so downstream code can recognise the canonical nine-vector.
pub fn with_quadratics(base: &ObservableVector) -> Result<ObservableVector> {
    let q = quadratic_extension(base)?;
    let mut v = base.concat(&q)?;
    v.kind = base.kind;
    Ok(v)
}

/// Generator set selected by name: su2, su11, su11_single, hw, gaussian_full.
pub fn algebra_by_name(name: &str, basis: FockBasis) -> Result<ObservableVector> {
    match name {
        "su2" => make_su2(basis),
        "su11" => make_su11_two_mode(basis),
        "su11_single" => make_su11_single_mode(basis, 0),
        "hw" => make_quadratures(basis),
        "gaussian_full" => {
            let l = make_su11_single_mode(basis, 0)?;
            let k = make_su11_two_mode(basis)?;
            let j = make_su2(basis)?;
            l.concat(&k)?.concat(&j)
        }
        other => Err(invalid(format!("unknown algebra `{other}`"))),
    }
}
