//! Finite-dimensional density-matrix computations.
//!
//! Operators are stored either densely or, when every state involved is
//! diagonal in the computational basis, as a real diagonal. The diagonal form
//! is exact (not an approximation) and keeps commuting channels tractable at
//! output dimensions where a dense matrix would not fit in memory.
//!
//! All logarithms are base 2.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::config::Tolerances;
use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this magnitude count as zero in entropies and projector
/// sign decisions.
pub const SPECTRAL_FLOOR: f64 = 1e-12;

/// A Hermitian operator on a `dim`-dimensional space.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    Dense(CMatrix),
    Diagonal(DVector<f64>),
}

/// Eigendecomposition of a Hermitian operator. `vectors == None` means the
/// computational basis.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<CMatrix>,
}

impl Operator {
    pub fn identity(dim: usize) -> Self {
        Operator::Diagonal(DVector::from_element(dim, 1.0))
    }

    pub fn zeros(dim: usize) -> Self {
        Operator::Diagonal(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Dense(m) => m.nrows(),
            Operator::Diagonal(d) => d.len(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        match self {
            Operator::Diagonal(_) => true,
            Operator::Dense(m) => offdiagonal_is_zero(m),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match self {
            Operator::Dense(m) => m.clone(),
            Operator::Diagonal(d) => {
                CMatrix::from_diagonal(&d.map(|x| Complex64::new(x, 0.0)))
            }
        }
    }

    /// Matrix entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match self {
            Operator::Dense(m) => m[(i, j)],
            Operator::Diagonal(d) if i == j => Complex64::new(d[i], 0.0),
            Operator::Diagonal(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Real part of the trace.
    pub fn trace(&self) -> f64 {
        match self {
            Operator::Dense(m) => (0..m.nrows()).map(|i| m[(i, i)].re).sum(),
            Operator::Diagonal(d) => d.sum(),
        }
    }

    pub fn eigh(&self) -> Spectrum {
        match self {
            Operator::Diagonal(d) => Spectrum {
                values: d.iter().copied().collect(),
                vectors: None,
            },
            Operator::Dense(m) if offdiagonal_is_zero(m) => Spectrum {
                values: (0..m.nrows()).map(|i| m[(i, i)].re).collect(),
                vectors: None,
            },
            Operator::Dense(m) => {
                let (values, vectors) = hermitian_eigen(m, true);
                Spectrum { values, vectors }
            }
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match self {
            Operator::Dense(m) if !offdiagonal_is_zero(m) => hermitian_eigen(m, false).0,
            _ => self.eigh().values,
        }
    }

    /// Applies `f` to the spectrum: `V diag(f(λ)) V†`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Operator {
        let Spectrum { values, vectors } = self.eigh();
        let mapped: Vec<f64> = values.iter().map(|&x| f(x)).collect();
        match vectors {
            None => Operator::Diagonal(DVector::from_vec(mapped)),
            Some(v) => {
                let mut scaled = v.clone();
                for (k, &w) in mapped.iter().enumerate() {
                    scaled.column_mut(k).scale_mut(w);
                }
                Operator::Dense(hermitize(&(scaled * v.adjoint())))
            }
        }
    }

    /// Square root of the PSD part (negative eigenvalues clipped to 0).
    pub fn sqrt_psd(&self) -> Operator {
        self.map_spectrum(|x| x.max(0.0).sqrt())
    }

    /// Projector onto the eigenspace with eigenvalue `>= -floor`.
    pub fn nonnegative_projector(&self, floor: f64) -> Operator {
        self.map_spectrum(|x| if x >= -floor { 1.0 } else { 0.0 })
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        match (self, other) {
            (Operator::Diagonal(a), Operator::Diagonal(b)) => {
                let mut out = Vec::with_capacity(a.len() * b.len());
                for &x in a.iter() {
                    out.extend(b.iter().map(|&y| x * y));
                }
                Operator::Diagonal(DVector::from_vec(out))
            }
            _ => Operator::Dense(self.to_dense().kronecker(&other.to_dense())),
        }
    }

    pub fn scaled(&self, w: f64) -> Operator {
        match self {
            Operator::Dense(m) => Operator::Dense(m * Complex64::new(w, 0.0)),
            Operator::Diagonal(d) => Operator::Diagonal(d * w),
        }
    }

    /// `self += w · other`.
    pub fn add_scaled(&mut self, other: &Operator, w: f64) {
        match (&mut *self, other) {
            (Operator::Diagonal(a), Operator::Diagonal(b)) => a.axpy(w, b, 1.0),
            (Operator::Dense(a), Operator::Dense(b)) => {
                a.zip_apply(b, |x, y| *x += y * w);
            }
            (Operator::Dense(a), Operator::Diagonal(b)) => {
                for (i, &y) in b.iter().enumerate() {
                    a[(i, i)] += Complex64::new(w * y, 0.0);
                }
            }
            (Operator::Diagonal(_), Operator::Dense(_)) => {
                let mut dense = self.to_dense();
                if let Operator::Dense(b) = other {
                    dense.zip_apply(b, |x, y| *x += y * w);
                }
                *self = Operator::Dense(dense);
            }
        }
    }

    pub fn sub(&self, other: &Operator) -> Operator {
        let mut out = self.clone();
        out.add_scaled(other, -1.0);
        out
    }

    /// `Re tr(self · other)`.
    pub fn trace_product(&self, other: &Operator) -> f64 {
        match (self, other) {
            (Operator::Diagonal(a), Operator::Diagonal(b)) => a.dot(b),
            (Operator::Diagonal(a), Operator::Dense(b)) | (Operator::Dense(b), Operator::Diagonal(a)) => {
                a.iter().enumerate().map(|(i, &x)| x * b[(i, i)].re).sum()
            }
            (Operator::Dense(a), Operator::Dense(b)) => {
                let n = a.nrows();
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        acc += (a[(i, j)] * b[(j, i)]).re;
                    }
                }
                acc
            }
        }
    }

    /// `P ρ P` with `self` playing the role of `P`.
    pub fn sandwich(&self, rho: &Operator) -> Operator {
        match (self, rho) {
            (Operator::Diagonal(p), Operator::Diagonal(r)) => {
                Operator::Diagonal(p.component_mul(r).component_mul(p))
            }
            _ => {
                let p = self.to_dense();
                Operator::Dense(hermitize(&(&p * rho.to_dense() * &p)))
            }
        }
    }

    /// Largest entrywise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        match (self, other) {
            (Operator::Diagonal(a), Operator::Diagonal(b)) => {
                a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            }
            _ => {
                let d = self.to_dense() - other.to_dense();
                d.iter().map(|z| z.norm()).fold(0.0, f64::max)
            }
        }
    }
}

fn offdiagonal_is_zero(m: &CMatrix) -> bool {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..n {
            if i != j && m[(i, j)] != Complex64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Eigendecomposition of the Hermitian part of `m`. Real symmetric input
/// takes the (much cheaper) real solver. The QR iteration occasionally
/// returns non-finite values on highly degenerate spectra; such results are
/// recomputed with the complex solver and then with a shifted matrix.
fn hermitian_eigen(m: &CMatrix, want_vectors: bool) -> (Vec<f64>, Option<CMatrix>) {
    let finite = |r: &(Vec<f64>, Option<CMatrix>)| {
        r.0.iter().all(|x| x.is_finite()) && r.1.as_ref().is_none_or(|v| v.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    };
    if m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re);
        let sym = (&re + re.transpose()) * 0.5;
        let out = if want_vectors {
            let eig = SymmetricEigen::new(sym);
            let vectors = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
            (eig.eigenvalues.iter().copied().collect(), Some(vectors))
        } else {
            (sym.symmetric_eigenvalues().iter().copied().collect(), None)
        };
        if finite(&out) {
            return out;
        }
    }
    let h = hermitize(m);
    let out = complex_eigen(&h, want_vectors);
    if finite(&out) {
        return out;
    }
    let n = h.nrows();
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let shift = Complex64::new(scale * std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let shifted = &h + CMatrix::identity(n, n) * shift;
    let (values, vectors) = complex_eigen(&shifted, want_vectors);
    (values.into_iter().map(|x| x - shift.re).collect(), vectors)
}

fn complex_eigen(h: &CMatrix, want_vectors: bool) -> (Vec<f64>, Option<CMatrix>) {
    if want_vectors {
        let eig = SymmetricEigen::new(h.clone());
        (eig.eigenvalues.iter().copied().collect(), Some(eig.eigenvectors))
    } else {
        (h.symmetric_eigenvalues().iter().copied().collect(), None)
    }
}

fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// A validated density matrix: Hermitian, PSD and unit trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        Self::with_tolerances(op, &Tolerances::default())
    }

    pub fn with_tolerances(op: Operator, tol: &Tolerances) -> Result<Self> {
        validate(&op, tol)?;
        Ok(DensityMatrix { op })
    }

    /// Wraps an operator already known to be a state (e.g. a convex mixture
    /// or tensor product of validated states).
    pub(crate) fn from_operator_unchecked(op: Operator) -> Self {
        DensityMatrix { op }
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Invariant(format!(
                "matrix is not square: {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        Self::new(Operator::Dense(m))
    }

    pub fn from_diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(Operator::Diagonal(DVector::from_column_slice(probs)))
    }

    /// `|ψ⟩⟨ψ|` for a ket normalized on the way in.
    pub fn pure(ket: &[Complex64]) -> Result<Self> {
        let norm: f64 = ket.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::Invariant("zero ket".into()));
        }
        let v = DVector::from_iterator(ket.len(), ket.iter().map(|z| z / norm));
        Ok(DensityMatrix {
            op: Operator::Dense(&v * v.adjoint()),
        })
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut d = DVector::zeros(dim);
        d[k] = 1.0;
        DensityMatrix {
            op: Operator::Diagonal(d),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            op: Operator::Diagonal(DVector::from_element(dim, 1.0 / dim as f64)),
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn into_operator(self) -> Operator {
        self.op
    }

    /// Same state with a dense representation.
    pub fn to_dense(&self) -> Self {
        DensityMatrix {
            op: Operator::Dense(self.op.to_dense()),
        }
    }

    pub fn kron(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix {
            op: self.op.kron(&other.op),
        }
    }

    /// Convex combination `Σ w_k ρ_k`.
    pub fn mixture(weights: &[f64], states: &[&DensityMatrix]) -> Result<DensityMatrix> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::Validation("mixture needs one weight per state".into()));
        }
        let dim = states[0].dim();
        let mut acc = Operator::zeros(dim);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
            acc.add_scaled(&s.op, *w);
        }
        DensityMatrix::new(acc)
    }
}

fn validate(op: &Operator, tol: &Tolerances) -> Result<()> {
    if let Operator::Dense(m) = op {
        if m.nrows() != m.ncols() {
            return Err(Error::Invariant("matrix is not square".into()));
        }
        let n = m.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if worst > tol.hermitian {
            return Err(Error::Invariant(format!(
                "not Hermitian (asymmetry {worst:.3e})"
            )));
        }
        let im: f64 = (0..n).map(|i| m[(i, i)].im).sum();
        if im.abs() > tol.trace {
            return Err(Error::Invariant(format!("trace has imaginary part {im:.3e}")));
        }
    }
    let tr = op.trace();
    if !tr.is_finite() || (tr - 1.0).abs() > tol.trace {
        return Err(Error::Invariant(format!("trace is {tr}, expected 1")));
    }
    let min = op.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
    if min < -tol.psd {
        return Err(Error::Invariant(format!(
            "not positive semi-definite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// `−Σ λ log₂ λ` over a spectrum, skipping values below the floor.
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&x| x > SPECTRAL_FLOOR)
        .map(|&x| -x * x.log2())
        .sum()
}

/// Shannon entropy in bits of a probability vector.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    spectrum_entropy(p)
}

/// `h₂(p)`.
pub fn binary_entropy(p: f64) -> f64 {
    shannon_entropy(&[p, 1.0 - p])
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    operator_entropy(&rho.op)
}

pub(crate) fn operator_entropy(op: &Operator) -> f64 {
    spectrum_entropy(&op.eigenvalues())
}

/// `F(ρ₀, ρ₁) = ‖√ρ₀ √ρ₁‖₁²`.
pub fn fidelity(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<f64> {
    if rho0.dim() != rho1.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), rho1.dim()));
    }
    let root = sqrt_fidelity_ops(&rho0.op, &rho1.op);
    Ok(root * root)
}

/// `‖√A √B‖₁` for PSD operators; equals `√F` for states.
pub(crate) fn sqrt_fidelity_ops(a: &Operator, b: &Operator) -> f64 {
    if let (Operator::Diagonal(x), Operator::Diagonal(y)) = (a, b) {
        return x
            .iter()
            .zip(y.iter())
            .map(|(p, q)| (p.max(0.0) * q.max(0.0)).sqrt())
            .sum();
    }
    // ‖√A √B‖₁ = tr √(√A B √A); eigenvalues within rounding noise of zero
    // are dropped so they do not contribute their square roots.
    let floor_a = rounding_floor(a.dim(), a.trace().abs());
    let sa = a.map_spectrum(|x| if x > floor_a { x.sqrt() } else { 0.0 }).to_dense();
    let inner = Operator::Dense(&sa * b.to_dense() * &sa);
    let values = inner.eigenvalues();
    let top = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let floor = rounding_floor(values.len(), top);
    values.iter().filter(|&&x| x > floor).map(|x| x.sqrt()).sum()
}

/// Size of eigenvalue errors expected from a dense solve of dimension `dim`
/// with spectral scale `scale`.
fn rounding_floor(dim: usize, scale: f64) -> f64 {
    64.0 * f64::EPSILON * dim as f64 * scale
}

/// Projector onto the non-negative eigenspace of `√ρ₀ − √ρ₁`. Zero
/// eigenvalues go to the positive side so `{Π, I − Π}` is complete.
pub fn helstrom_projector(rho0: &DensityMatrix, rho1: &DensityMatrix) -> Result<Operator> {
    if rho0.dim() != rho1.dim() {
        return Err(Error::DimensionMismatch(rho0.dim(), rho1.dim()));
    }
    Ok(helstrom_projector_ops(&rho0.op, &rho1.op, SPECTRAL_FLOOR))
}

pub(crate) fn helstrom_projector_ops(a: &Operator, b: &Operator, floor: f64) -> Operator {
    a.sqrt_psd().sub(&b.sqrt_psd()).nonnegative_projector(floor)
}

/// A classical register correlated with a quantum system:
/// `Σ_x w_x |x⟩⟨x| ⊗ ρ_x`.
#[derive(Clone, Debug)]
pub struct ClassicalQuantumState {
    weights: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl ClassicalQuantumState {
    pub fn new(weights: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        check_weights(&weights, Tolerances::default().trace)?;
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::Validation(format!(
                "{} weights for {} conditional states",
                weights.len(),
                states.len()
            )));
        }
        let dim = states[0].dim();
        if let Some(bad) = states.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.dim()));
        }
        Ok(ClassicalQuantumState { weights, states })
    }

    /// Uniform prior over the given states.
    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        Self::new(vec![w; states.len()], states)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    /// The reduced state `Σ_x w_x ρ_x` on the quantum system.
    pub fn average(&self) -> DensityMatrix {
        let mut acc = Operator::zeros(self.states[0].dim());
        for (w, s) in self.weights.iter().zip(&self.states) {
            acc.add_scaled(&s.op, *w);
        }
        DensityMatrix::from_operator_unchecked(acc)
    }
}

fn check_weights(weights: &[f64], tol: f64) -> Result<()> {
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::Invariant("negative or NaN weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(Error::Invariant(format!("weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// `I(X;B) = H(Σ w ρ) − Σ w H(ρ)`.
pub fn holevo_information(cq: &ClassicalQuantumState) -> f64 {
    let avg = von_neumann_entropy(&cq.average());
    let cond: f64 = cq
        .weights
        .iter()
        .zip(&cq.states)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, s)| w * von_neumann_entropy(s))
        .sum();
    avg - cond
}

/// `Σ_{x,y} w(x,y) |x⟩⟨x| ⊗ |y⟩⟨y| ⊗ ρ_{x,y}` with classical registers X and Y.
#[derive(Clone, Debug)]
pub struct CcqState {
    weights: Vec<Vec<f64>>,
    states: Vec<Vec<DensityMatrix>>,
}

impl CcqState {
    /// `weights[x][y]` and `states[x][y]`.
    pub fn new(weights: Vec<Vec<f64>>, states: Vec<Vec<DensityMatrix>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != states.len() {
            return Err(Error::Validation("register X labels do not match".into()));
        }
        let ny = weights[0].len();
        if ny == 0 {
            return Err(Error::Validation("register Y has no labels".into()));
        }
        for (wx, sx) in weights.iter().zip(&states) {
            if wx.len() != ny || sx.len() != ny {
                return Err(Error::Validation("ragged register Y".into()));
            }
        }
        let flat: Vec<f64> = weights.iter().flatten().copied().collect();
        check_weights(&flat, Tolerances::default().trace)?;
        let dim = states[0][0].dim();
        if let Some(bad) = states.iter().flatten().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(dim, bad.dim()));
        }
        Ok(CcqState { weights, states })
    }

    /// Uniform independent X and Y.
    pub fn uniform(states: Vec<Vec<DensityMatrix>>) -> Result<Self> {
        let nx = states.len();
        let ny = states.first().map_or(0, |r| r.len());
        let w = 1.0 / (nx * ny).max(1) as f64;
        Self::new(vec![vec![w; ny]; nx], states)
    }

    pub fn x_labels(&self) -> usize {
        self.weights.len()
    }
}

/// `I(X;B|Y) = H(XY) + H(YB) − H(Y) − H(XYB)`, each entropy taken on the
/// block-diagonal state.
pub fn conditional_mutual_information(state: &CcqState) -> f64 {
    let nx = state.weights.len();
    let ny = state.weights[0].len();
    let dim = state.states[0][0].dim();
    let flat: Vec<f64> = state.weights.iter().flatten().copied().collect();
    let wy: Vec<f64> = (0..ny).map(|y| (0..nx).map(|x| state.weights[x][y]).sum()).collect();

    let h_xy = shannon_entropy(&flat);
    let h_y = shannon_entropy(&wy);
    let mut h_yb = h_y;
    for y in 0..ny {
        if wy[y] <= 0.0 {
            continue;
        }
        let mut acc = Operator::zeros(dim);
        for x in 0..nx {
            acc.add_scaled(state.states[x][y].operator(), state.weights[x][y] / wy[y]);
        }
        h_yb += wy[y] * operator_entropy(&acc);
    }
    let mut h_xyb = h_xy;
    for x in 0..nx {
        for y in 0..ny {
            let w = state.weights[x][y];
            if w > 0.0 {
                h_xyb += w * von_neumann_entropy(&state.states[x][y]);
            }
        }
    }
    h_xy + h_yb - h_y - h_xyb
}

/// Partial trace over the factors not listed in `keep`. Factors are ordered
/// with the first one most significant, matching `kron`.
pub fn partial_trace(rho: &DensityMatrix, dims: &[usize], keep: &[usize]) -> Result<DensityMatrix> {
    let op = partial_trace_op(&rho.op, dims, keep)?;
    Ok(DensityMatrix::from_operator_unchecked(op))
}

pub(crate) fn partial_trace_op(op: &Operator, dims: &[usize], keep: &[usize]) -> Result<Operator> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || total != op.dim() {
        return Err(Error::Validation(format!(
            "factor dimensions {dims:?} do not multiply to {}",
            op.dim()
        )));
    }
    if keep.is_empty() || keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Validation(format!("invalid kept factors {keep:?}")));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() {
        return Err(Error::Validation(format!("repeated kept factors {keep:?}")));
    }

    // Split every full index into (kept index, traced index).
    let kept_dim: usize = keep_sorted.iter().map(|&k| dims[k]).product();
    let mut kept_of = vec![0usize; total];
    let mut traced_of = vec![0usize; total];
    for (full, (kept_slot, traced_slot)) in kept_of.iter_mut().zip(traced_of.iter_mut()).enumerate() {
        let mut rem = full;
        let mut digits = vec![0usize; dims.len()];
        for f in (0..dims.len()).rev() {
            digits[f] = rem % dims[f];
            rem /= dims[f];
        }
        let (mut ki, mut ti) = (0usize, 0usize);
        for (f, &d) in digits.iter().enumerate() {
            if keep_sorted.binary_search(&f).is_ok() {
                ki = ki * dims[f] + d;
            } else {
                ti = ti * dims[f] + d;
            }
        }
        *kept_slot = ki;
        *traced_slot = ti;
    }

    Ok(match op {
        Operator::Diagonal(d) => {
            let mut out = DVector::zeros(kept_dim);
            for (full, &p) in d.iter().enumerate() {
                out[kept_of[full]] += p;
            }
            Operator::Diagonal(out)
        }
        Operator::Dense(m) => {
            let mut out = CMatrix::zeros(kept_dim, kept_dim);
            for a in 0..total {
                for b in 0..total {
                    if traced_of[a] == traced_of[b] {
                        out[(kept_of[a], kept_of[b])] += m[(a, b)];
                    }
                }
            }
            Operator::Dense(out)
        }
    })
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Haar-random pure state.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let ket: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(standard_normal(rng), standard_normal(rng)))
        .collect();
    DensityMatrix::pure(&ket).expect("non-zero Gaussian ket")
}

/// Random full-rank mixed state `G G† / tr(G G†)` from a Ginibre matrix.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(standard_normal(rng), standard_normal(rng))
    });
    let m = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| m[(i, i)].re).sum();
    let m = hermitize(&(m / Complex64::new(tr, 0.0)));
    DensityMatrix::from_operator_unchecked(Operator::Dense(m))
}

/// Random diagonal (classical) state.
pub fn random_diagonal_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let raw: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let p: Vec<f64> = raw.iter().map(|x| x / total).collect();
    DensityMatrix::from_operator_unchecked(Operator::Diagonal(DVector::from_vec(p)))
}
