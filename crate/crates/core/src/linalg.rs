//! Dense complex Hermitian linear algebra and the quantum-state primitives
//! shared by the rest of the crate.
//!
//! Every eigendecomposition goes through [`eigh`], which first replaces its
//! input by `(A + A†)/2`. Entropies are in bits.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Default tolerance for Hermiticity, PSD and normalisation checks.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Relative eigenvalue cutoff used for supports and pseudo-inverses.
pub const SUPPORT_CUTOFF: f64 = 1e-10;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// `(A + A†)/2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Largest entry-wise deviation from Hermiticity.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of the Hermitian part of `m`; eigenvalues ascending,
/// eigenvectors in the matching columns.
pub fn eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn eigenvalues(m: &CMatrix) -> Vec<f64> {
    eigh(m).0
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Rebuilds `V diag(f(λ)) V†` from an eigendecomposition of `m`.
pub fn map_spectrum(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = eigh(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = f(v);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    scaled * vecs.adjoint()
}

/// Sum of singular values.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return dim_err(format!("trace norm of a {}x{} matrix", m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let scale = m.iter().fold(1.0f64, |acc, z| acc.max(z.norm()));
    if hermiticity_defect(m) <= 1e-12 * scale {
        Ok(eigenvalues(m).iter().map(|v| v.abs()).sum())
    } else {
        Ok(m.clone().svd(false, false).singular_values.sum())
    }
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// `a ⊗ a ⊗ … ⊗ a` with `n` factors (`n = 0` gives the 1×1 identity).
pub fn kron_power(a: &CMatrix, n: usize) -> CMatrix {
    let mut out = identity(1);
    for _ in 0..n {
        out = out.kronecker(a);
    }
    out
}

pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

/// Projector `Σ_j |v_j⟩⟨v_j|` onto the span of orthonormal columns.
pub fn projector_from_columns(cols: &CMatrix) -> CMatrix {
    cols * cols.adjoint()
}

/// Shannon/von Neumann entropy (bits) of a spectrum; non-positive entries
/// contribute nothing.
pub fn entropy_of_spectrum(spectrum: &[f64]) -> f64 {
    spectrum
        .iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

pub fn operator_entropy(m: &CMatrix) -> f64 {
    entropy_of_spectrum(&eigenvalues(m))
}

fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

fn compose(digits: impl Iterator<Item = (usize, usize)>) -> usize {
    digits.fold(0, |acc, (digit, d)| acc * d + digit)
}

fn check_registers(dim: usize, dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return dim_err("register dimensions must be positive and non-empty");
    }
    let prod: usize = dims.iter().product();
    if prod != dim {
        return dim_err(format!(
            "register dims {dims:?} multiply to {prod}, operator has dimension {dim}"
        ));
    }
    Ok(())
}

/// Partial trace of an arbitrary square operator over `traced` registers.
pub fn partial_trace_op(m: &CMatrix, dims: &[usize], traced: &[usize]) -> Result<CMatrix> {
    if !m.is_square() {
        return dim_err("partial trace of a non-square matrix");
    }
    check_registers(m.nrows(), dims)?;
    if let Some(&bad) = traced.iter().find(|&&r| r >= dims.len()) {
        return dim_err(format!("register {bad} out of range for {} registers", dims.len()));
    }
    let keep: Vec<usize> = (0..dims.len()).filter(|r| !traced.contains(r)).collect();
    let keep_dims: Vec<usize> = keep.iter().map(|&r| dims[r]).collect();
    let out_dim: usize = keep_dims.iter().product();
    let total = m.nrows();
    let all_digits: Vec<Vec<usize>> = (0..total).map(|i| digits(i, dims)).collect();
    let kept_index: Vec<usize> = all_digits
        .iter()
        .map(|dg| compose(keep.iter().map(|&r| (dg[r], dims[r]))))
        .collect();
    let traced_index: Vec<usize> = all_digits
        .iter()
        .map(|dg| compose(traced.iter().map(|&r| (dg[r], dims[r]))))
        .collect();
    let mut out = CMatrix::zeros(out_dim, out_dim);
    for i in 0..total {
        for j in 0..total {
            if traced_index[i] == traced_index[j] {
                out[(kept_index[i], kept_index[j])] += m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Reorders tensor factors: output register `r` is input register `perm[r]`.
pub fn permute_registers(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    check_registers(m.nrows(), dims)?;
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() {
        return dim_err("permutation length differs from register count");
    }
    for &p in perm {
        if p >= dims.len() || seen[p] {
            return Err(Error::Argument(format!("{perm:?} is not a permutation")));
        }
        seen[p] = true;
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total = m.nrows();
    let map: Vec<usize> = (0..total)
        .map(|i| {
            let dg = digits(i, dims);
            compose(perm.iter().map(|&p| dg[p]).zip(new_dims.iter().copied()))
        })
        .collect();
    let mut out = CMatrix::zeros(total, total);
    for i in 0..total {
        for j in 0..total {
            out[(map[i], map[j])] = m[(i, j)];
        }
    }
    Ok(out)
}

/// Square matrix that is Hermitian within its tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    mat: CMatrix,
    tol: f64,
}

impl HermitianOperator {
    /// Checks Hermiticity within `tol` and stores the Hermitian part.
    pub fn new(mat: CMatrix, tol: f64) -> Result<Self> {
        if !mat.is_square() || mat.nrows() == 0 {
            return dim_err(format!("{}x{} is not a square operator", mat.nrows(), mat.ncols()));
        }
        let defect = hermiticity_defect(&mat);
        if defect > tol {
            return Err(Error::Validation(format!("not Hermitian (defect {defect:.3e})")));
        }
        Ok(Self { mat: hermitize(&mat), tol })
    }

    pub fn from_matrix(mat: CMatrix) -> Result<Self> {
        Self::new(mat, DEFAULT_TOL)
    }

    /// Real symmetric matrix given row-major.
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let mut mat = CMatrix::zeros(n, rows.first().map_or(0, |r| r.len()));
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                mat[(i, j)] = c(v, 0.0);
            }
        }
        Self::from_matrix(mat)
    }

    pub fn identity(d: usize) -> Self {
        Self { mat: identity(d), tol: DEFAULT_TOL }
    }

    pub fn zeros(d: usize) -> Self {
        Self { mat: CMatrix::zeros(d, d), tol: DEFAULT_TOL }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        let mut mat = CMatrix::zeros(d, d);
        for (i, &v) in values.iter().enumerate() {
            mat[(i, i)] = c(v, 0.0);
        }
        Self { mat, tol: DEFAULT_TOL }
    }

    /// `|v⟩⟨v|` for a (not necessarily normalised) vector.
    pub fn ket_bra(v: &CVector) -> Self {
        Self { mat: v * v.adjoint(), tol: DEFAULT_TOL }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        eigh(&self.mat)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        eigenvalues(&self.mat)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        max_eigenvalue(&self.mat)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.mat)
    }

    /// `max(0, -λ_min)`.
    pub fn psd_defect(&self) -> f64 {
        (-self.min_eigenvalue()).max(0.0)
    }

    pub fn is_psd(&self) -> bool {
        self.psd_defect() <= self.tol
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { mat: map_spectrum(&self.mat, f), tol: self.tol }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { mat: self.mat.scale(s), tol: self.tol }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self { mat: &self.mat + &other.mat, tol: self.tol })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.same_dim(other)?;
        Ok(Self { mat: &self.mat - &other.mat, tol: self.tol })
    }

    pub fn tensor(&self, other: &Self) -> Self {
        Self { mat: kron(&self.mat, &other.mat), tol: self.tol.max(other.tol) }
    }

    /// `B A B` for Hermitian `B`; the result is Hermitian again.
    pub fn sandwich(&self, outer: &Self) -> Result<Self> {
        self.same_dim(outer)?;
        Ok(Self { mat: hermitize(&(&outer.mat * &self.mat * &outer.mat)), tol: self.tol })
    }

    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|v| v.abs()).sum()
    }

    fn same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return dim_err(format!("operators of dimension {} and {}", self.dim(), other.dim()));
        }
        Ok(())
    }
}

fn psd_eigh(op: &HermitianOperator) -> Result<(Vec<f64>, CMatrix)> {
    let (vals, vecs) = op.eigh();
    let top = vals.last().copied().unwrap_or(0.0).abs().max(1.0);
    if let Some(&low) = vals.first() {
        if low < -op.tolerance() * top {
            return Err(Error::Validation(format!("operator has negative eigenvalue {low:.3e}")));
        }
    }
    Ok((vals, vecs))
}

fn rebuild(vals: &[f64], vecs: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        let s = f(v);
        for i in 0..vecs.nrows() {
            scaled[(i, j)] *= s;
        }
    }
    hermitize(&(scaled * vecs.adjoint()))
}

/// Positive square root of a PSD operator.
pub fn psd_sqrt(op: &HermitianOperator) -> Result<HermitianOperator> {
    let (vals, vecs) = psd_eigh(op)?;
    let mat = rebuild(&vals, &vecs, |v| v.max(0.0).sqrt());
    Ok(HermitianOperator { mat, tol: op.tolerance() })
}

/// Moore–Penrose inverse of the square root, restricted to the support
/// (eigenvalues at or below `SUPPORT_CUTOFF · λ_max` map to zero).
pub fn psd_pinv_sqrt(op: &HermitianOperator) -> Result<HermitianOperator> {
    let (vals, vecs) = psd_eigh(op)?;
    let cutoff = SUPPORT_CUTOFF * vals.last().copied().unwrap_or(0.0).max(0.0);
    let mat = rebuild(&vals, &vecs, |v| if v > cutoff { 1.0 / v.sqrt() } else { 0.0 });
    Ok(HermitianOperator { mat, tol: op.tolerance() })
}

/// Unit-trace PSD operator over an ordered list of registers.
#[derive(Clone, Debug)]
pub struct DensityOperator {
    op: HermitianOperator,
    register_dims: Vec<usize>,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator, register_dims: Vec<usize>) -> Result<Self> {
        check_registers(op.dim(), &register_dims)?;
        let tr = op.trace();
        if (tr - 1.0).abs() > op.tolerance().max(DEFAULT_TOL) {
            return Err(Error::Validation(format!("density operator has trace {tr}")));
        }
        let defect = op.psd_defect();
        if defect > op.tolerance().max(DEFAULT_TOL) {
            return Err(Error::Validation(format!(
                "density operator not PSD (defect {defect:.3e})"
            )));
        }
        Ok(Self { op, register_dims })
    }

    pub fn from_matrix(mat: CMatrix, register_dims: Vec<usize>) -> Result<Self> {
        Self::new(HermitianOperator::from_matrix(mat)?, register_dims)
    }

    pub fn single(mat: CMatrix) -> Result<Self> {
        let d = mat.nrows();
        Self::from_matrix(mat, vec![d])
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self { op: HermitianOperator::identity(d).scale(1.0 / d as f64), register_dims: vec![d] }
    }

    /// `|ψ⟩⟨ψ|` after normalising `psi`.
    pub fn pure(psi: &CVector, register_dims: Vec<usize>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::Validation("zero vector".into()));
        }
        Self::new(HermitianOperator::ket_bra(&psi.unscale(norm)), register_dims)
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn register_dims(&self) -> &[usize] {
        &self.register_dims
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.register_dims.clone();
        dims.extend_from_slice(&other.register_dims);
        Self { op: self.op.tensor(&other.op), register_dims: dims }
    }

    pub fn tensor_power(&self, n: usize) -> Self {
        let mut dims = Vec::with_capacity(n * self.register_dims.len());
        for _ in 0..n {
            dims.extend_from_slice(&self.register_dims);
        }
        Self {
            op: HermitianOperator { mat: kron_power(self.op.matrix(), n), tol: self.op.tolerance() },
            register_dims: dims,
        }
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(self)
    }

    pub fn partial_trace(&self, traced: &[usize]) -> Result<Self> {
        partial_trace(self, traced)
    }

    pub fn purify(&self) -> Result<PureState> {
        purify(self)
    }
}

/// Unit vector over an ordered list of registers.
#[derive(Clone, Debug)]
pub struct PureState {
    vec: CVector,
    register_dims: Vec<usize>,
}

impl PureState {
    pub fn new(vec: CVector, register_dims: Vec<usize>) -> Result<Self> {
        check_registers(vec.len(), &register_dims)?;
        let norm = vec.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("state vector has norm {norm}")));
        }
        Ok(Self { vec, register_dims })
    }

    pub fn vector(&self) -> &CVector {
        &self.vec
    }

    pub fn register_dims(&self) -> &[usize] {
        &self.register_dims
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator {
            op: HermitianOperator::ket_bra(&self.vec),
            register_dims: self.register_dims.clone(),
        }
    }
}

pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    entropy_of_spectrum(&rho.op.eigenvalues())
}

pub fn partial_trace(rho: &DensityOperator, traced: &[usize]) -> Result<DensityOperator> {
    let n = rho.register_dims.len();
    let remaining: Vec<usize> = (0..n).filter(|r| !traced.contains(r)).collect();
    if remaining.is_empty() {
        return Err(Error::Argument("partial trace would remove every register".into()));
    }
    let mat = partial_trace_op(rho.matrix(), &rho.register_dims, traced)?;
    let dims = remaining.iter().map(|&r| rho.register_dims[r]).collect();
    DensityOperator::new(HermitianOperator::new(mat, rho.op.tolerance())?, dims)
}

/// `S(A) + S(B) - S(AB)` where `A` is the set of registers in `cut` and `B`
/// the rest.
pub fn quantum_mutual_information(rho: &DensityOperator, cut: &[usize]) -> Result<f64> {
    let n = rho.register_dims.len();
    if cut.is_empty() || cut.len() >= n || cut.iter().any(|&r| r >= n) {
        return dim_err(format!("cut {cut:?} does not split {n} registers"));
    }
    let rest: Vec<usize> = (0..n).filter(|r| !cut.contains(r)).collect();
    let rho_a = partial_trace(rho, &rest)?;
    let rho_b = partial_trace(rho, cut)?;
    Ok(rho_a.entropy() + rho_b.entropy() - rho.entropy())
}

/// `Ψ = Σ_i |i⟩_R ⊗ √ρ|i⟩`; the reference register comes first and has
/// dimension `dim(ρ)`.
pub fn purify(rho: &DensityOperator) -> Result<PureState> {
    let root = psd_sqrt(&rho.op)?;
    let d = rho.dim();
    let mut vec = CVector::zeros(d * d);
    for r in 0..d {
        for a in 0..d {
            vec[r * d + a] = root.matrix()[(a, r)];
        }
    }
    let norm = vec.norm();
    vec.unscale_mut(norm);
    let mut dims = vec![d];
    dims.extend_from_slice(&rho.register_dims);
    PureState::new(vec, dims)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmMode {
    Povm,
    SubPovm,
}

/// Labelled collection of PSD operators on one space.
#[derive(Clone, Debug)]
pub struct Povm {
    outcomes: Vec<String>,
    elements: Vec<HermitianOperator>,
}

#[derive(Clone, Debug)]
pub struct PovmReport {
    /// `max(0, -λ_min)` per element.
    pub psd_defects: Vec<f64>,
    /// `‖I - Σ Λ_x‖₁`.
    pub completeness_defect: f64,
    /// Largest eigenvalue of `Σ Λ_x - I`.
    pub excess: f64,
    /// `I - Σ Λ_x`, reported in sub-POVM mode.
    pub completion: Option<HermitianOperator>,
    pub valid: bool,
}

impl Povm {
    pub fn new(outcomes: Vec<String>, elements: Vec<HermitianOperator>) -> Result<Self> {
        if outcomes.len() != elements.len() {
            return dim_err("one label per POVM element required");
        }
        let Some(first) = elements.first() else {
            return Err(Error::Argument("empty POVM".into()));
        };
        if elements.iter().any(|e| e.dim() != first.dim()) {
            return dim_err("POVM elements act on different dimensions");
        }
        Ok(Self { outcomes, elements })
    }

    /// Elements labelled `"0"`, `"1"`, ….
    pub fn from_elements(elements: Vec<HermitianOperator>) -> Result<Self> {
        let outcomes = (0..elements.len()).map(|i| i.to_string()).collect();
        Self::new(outcomes, elements)
    }

    /// Rank-one projective measurement in the computational basis.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d)
            .map(|i| {
                let mut v = vec![0.0; d];
                v[i] = 1.0;
                HermitianOperator::diagonal(&v)
            })
            .collect();
        Self::from_elements(elements).expect("non-empty")
    }

    pub fn trivial(d: usize) -> Self {
        Self::from_elements(vec![HermitianOperator::identity(d)]).expect("non-empty")
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &HermitianOperator {
        &self.elements[i]
    }

    pub fn sum(&self) -> CMatrix {
        self.elements
            .iter()
            .fold(CMatrix::zeros(self.dim(), self.dim()), |acc, e| acc + e.matrix())
    }

    /// Appends zero elements until there are `len` outcomes.
    pub fn padded(&self, len: usize) -> Self {
        let mut out = self.clone();
        while out.elements.len() < len {
            out.outcomes.push(out.elements.len().to_string());
            out.elements.push(HermitianOperator::zeros(self.dim()));
        }
        out
    }

    /// `{Λ_x ⊗ Λ'_y}` with outcomes in row-major `(x, y)` order.
    pub fn tensor(&self, other: &Self) -> Self {
        let mut outcomes = Vec::new();
        let mut elements = Vec::new();
        for (a, ea) in self.outcomes.iter().zip(&self.elements) {
            for (b, eb) in other.outcomes.iter().zip(&other.elements) {
                outcomes.push(format!("{a},{b}"));
                elements.push(ea.tensor(eb));
            }
        }
        Self { outcomes, elements }
    }

    pub fn validate(&self, mode: PovmMode) -> PovmReport {
        validate_povm(self, mode)
    }
}

pub fn validate_povm(povm: &Povm, mode: PovmMode) -> PovmReport {
    let tol = povm
        .elements
        .iter()
        .map(|e| e.tolerance())
        .fold(DEFAULT_TOL, f64::max);
    let psd_defects: Vec<f64> = povm.elements.iter().map(|e| e.psd_defect()).collect();
    let residual = identity(povm.dim()) - povm.sum();
    let completeness_defect = trace_norm(&residual).unwrap_or(f64::INFINITY);
    let excess = -min_eigenvalue(&residual);
    let psd_ok = psd_defects.iter().all(|&d| d <= tol);
    let (valid, completion) = match mode {
        PovmMode::Povm => (psd_ok && completeness_defect <= tol, None),
        PovmMode::SubPovm => (
            psd_ok && excess <= tol,
            Some(HermitianOperator { mat: hermitize(&residual), tol }),
        ),
    };
    PovmReport { psd_defects, completeness_defect, excess, completion, valid }
}

/// Row-list JSON encoding of complex matrices: each entry is `[re, im]`.
pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn matrix_from_json(rows: &MatrixJson) -> Result<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != m) {
        return dim_err("ragged matrix rows");
    }
    Ok(CMatrix::from_fn(n, m, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

/// `#[serde(with = "matrix_serde")]` adapter for [`CMatrix`] fields.
pub mod matrix_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &CMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
        matrix_to_json(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CMatrix, D::Error> {
        let rows = MatrixJson::deserialize(d)?;
        matrix_from_json(&rows).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PovmJson {
    #[serde(default)]
    pub outcomes: Vec<String>,
    pub elements: Vec<MatrixJson>,
}

impl PovmJson {
    pub fn from_povm(p: &Povm) -> Self {
        Self {
            outcomes: p.outcomes.clone(),
            elements: p.elements.iter().map(|e| matrix_to_json(e.matrix())).collect(),
        }
    }

    pub fn to_povm(&self) -> Result<Povm> {
        let elements = self
            .elements
            .iter()
            .map(|e| HermitianOperator::from_matrix(matrix_from_json(e)?))
            .collect::<Result<Vec<_>>>()?;
        if self.outcomes.is_empty() {
            Povm::from_elements(elements)
        } else {
            Povm::new(self.outcomes.clone(), elements)
        }
    }
}

/// Random matrices for tests and Monte-Carlo experiments.
pub mod random {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Complex Ginibre matrix with unit-variance entries.
    pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            c(re, im).unscale(std::f64::consts::SQRT_2)
        })
    }

    /// Haar-random unitary via QR of a Ginibre matrix with phase fix.
    pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
        let qr = ginibre(d, d, rng).qr();
        let (q, r) = (qr.q(), qr.r());
        let mut out = q;
        for j in 0..d {
            let diag = r[(j, j)];
            let phase = if diag.norm() > 0.0 { diag / diag.norm() } else { c(1.0, 0.0) };
            for i in 0..d {
                out[(i, j)] *= phase;
            }
        }
        out
    }

    pub fn hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
        let g = ginibre(d, d, rng);
        HermitianOperator { mat: hermitize(&g), tol: DEFAULT_TOL }
    }

    /// `G G†` for a `d × rank` Ginibre `G`.
    pub fn psd<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> HermitianOperator {
        let g = ginibre(d, rank, rng);
        HermitianOperator { mat: hermitize(&(&g * g.adjoint())), tol: DEFAULT_TOL }
    }

    pub fn density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DensityOperator {
        let p = psd(d, rank, rng);
        let tr = p.trace();
        DensityOperator { op: p.scale(1.0 / tr), register_dims: vec![d] }
    }

    pub fn density_on<R: Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> DensityOperator {
        let d = dims.iter().product();
        let mut rho = density(d, rank, rng);
        rho.register_dims = dims.to_vec();
        rho
    }

    /// Random complete POVM `{S^{-1/2} X_y S^{-1/2}}` with `S = Σ X_y`.
    pub fn povm<R: Rng + ?Sized>(d: usize, outcomes: usize, rng: &mut R) -> Povm {
        let raw: Vec<HermitianOperator> = (0..outcomes).map(|_| psd(d, d, rng)).collect();
        let total = raw.iter().fold(CMatrix::zeros(d, d), |acc, x| acc + x.matrix());
        let root = psd_pinv_sqrt(&HermitianOperator { mat: total, tol: DEFAULT_TOL })
            .expect("sum of PSD samples is PSD");
        let elements = raw
            .iter()
            .map(|x| x.sandwich(&root).expect("matching dims"))
            .collect();
        Povm::from_elements(elements).expect("non-empty")
    }

    /// Rank-one projective measurement in a Haar-random basis.
    pub fn projective<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Povm {
        let u = unitary(d, rng);
        let elements = (0..d)
            .map(|j| HermitianOperator::ket_bra(&u.column(j).into_owned()))
            .collect();
        Povm::from_elements(elements).expect("non-empty")
    }
}
