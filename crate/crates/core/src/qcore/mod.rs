//! Dense complex Hermitian algebra and the quantum-information primitives
//! (entropies, partial traces, pinching) every other module builds on.
//!
//! Entropies are in bits. Eigenvalues in `[0, EIG_FLOOR]` count as exact
//! zeros in logarithms; anything below `-NEG_TOL` is treated as a genuine
//! positivity violation.

mod eig;
mod matrix;
pub mod random;

use thiserror::Error;

pub use eig::{eig_hermitian, Eigen};
pub use matrix::{c64, CMatrix, HermitianMatrix, C64, HERMITIAN_TOL, MAX_DIM};

/// Eigenvalues at or below this are zero for the purpose of `x log x`.
pub const EIG_FLOOR: f64 = 1e-12;
/// Eigenvalues below `-NEG_TOL` mark an input as not positive semidefinite.
pub const NEG_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {dim} outside the supported range 1..={max}", max = MAX_DIM)]
    DimensionTooLarge { dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (max defect {defect:e})")]
    NotHermitian { defect: f64 },
    #[error("matrix is not positive semidefinite (eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },
    #[error("support of the first argument is not contained in the second (weight {weight:e} outside); divergence is infinite")]
    SupportViolation { weight: f64 },
    #[error("layout {factors:?} does not match dimension {dim}")]
    LayoutMismatch { factors: Vec<usize>, dim: usize },
    #[error("factor index {index} out of range for a layout with {count} factors")]
    BadFactor { index: usize, count: usize },
    #[error("argument {value} outside [0, 1]")]
    OutOfRange { value: f64 },
}

/// Ordered tensor-factor dimensions for interpreting a composite operator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemLayout {
    dims: Vec<usize>,
}

impl SystemLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self, QError> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(QError::LayoutMismatch { factors: dims, dim: 0 });
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    fn check(&self, dim: usize) -> Result<(), QError> {
        if self.total() != dim {
            return Err(QError::LayoutMismatch { factors: self.dims.clone(), dim });
        }
        Ok(())
    }

    fn check_factor(&self, f: usize) -> Result<(), QError> {
        if f >= self.dims.len() {
            return Err(QError::BadFactor { index: f, count: self.dims.len() });
        }
        Ok(())
    }

    /// Digits of a flat index, most significant factor first.
    fn digits(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            out[k] = idx % d;
            idx /= d;
        }
        out
    }
}

/// Kronecker product; fails only when the result would exceed `MAX_DIM`.
pub fn tensor(a: &HermitianMatrix, b: &HermitianMatrix) -> Result<HermitianMatrix, QError> {
    let dim = a.dim() * b.dim();
    if dim > MAX_DIM {
        return Err(QError::DimensionTooLarge { dim });
    }
    Ok(HermitianMatrix::symmetrized(a.as_matrix().kron(b.as_matrix())))
}

/// Traces out every factor not listed in `keep`. Kept factors stay in layout
/// order.
pub fn partial_trace(m: &HermitianMatrix, layout: &SystemLayout, keep: &[usize]) -> Result<HermitianMatrix, QError> {
    layout.check(m.dim())?;
    for &k in keep {
        layout.check_factor(k)?;
    }
    let nf = layout.dims.len();
    let kept: Vec<bool> = (0..nf).map(|f| keep.contains(&f)).collect();
    let dk: usize = (0..nf).filter(|&f| kept[f]).map(|f| layout.dims[f]).product();
    let dt = layout.total() / dk;
    // table[kept_index][traced_index] = flat index
    let mut table = vec![vec![0usize; dt]; dk];
    for flat in 0..layout.total() {
        let digits = layout.digits(flat);
        let (mut ki, mut ti) = (0usize, 0usize);
        for f in 0..nf {
            if kept[f] {
                ki = ki * layout.dims[f] + digits[f];
            } else {
                ti = ti * layout.dims[f] + digits[f];
            }
        }
        table[ki][ti] = flat;
    }
    let src = m.as_matrix();
    let out = CMatrix::from_fn(dk, dk, |i, j| (0..dt).map(|t| src[(table[i][t], table[j][t])]).sum());
    Ok(HermitianMatrix::symmetrized(out))
}

/// Zeroes every entry whose row and column differ in the given factor.
pub fn pinch(m: &HermitianMatrix, layout: &SystemLayout, classical_factor: usize) -> Result<HermitianMatrix, QError> {
    layout.check(m.dim())?;
    layout.check_factor(classical_factor)?;
    let n = m.dim();
    let digit: Vec<usize> = (0..n).map(|i| layout.digits(i)[classical_factor]).collect();
    let src = m.as_matrix();
    let out = CMatrix::from_fn(n, n, |i, j| if digit[i] == digit[j] { src[(i, j)] } else { c64(0.0, 0.0) });
    Ok(HermitianMatrix::symmetrized(out))
}

#[inline]
fn xlog2x(x: f64) -> f64 {
    if x <= EIG_FLOOR {
        0.0
    } else {
        x * x.log2()
    }
}

/// −Σ λ log₂ λ over the spectrum; also valid for subnormalised operators.
pub fn von_neumann_entropy(rho: &HermitianMatrix) -> Result<f64, QError> {
    let e = eig_hermitian(rho);
    check_psd(&e)?;
    Ok(-e.values.iter().map(|&x| xlog2x(x)).sum::<f64>())
}

fn check_psd(e: &Eigen) -> Result<(), QError> {
    if e.min() < -NEG_TOL {
        return Err(QError::NotPsd { min_eig: e.min() });
    }
    Ok(())
}

/// D(ρ‖σ) = tr ρ log₂ρ − tr ρ log₂σ in bits.
pub fn relative_entropy(rho: &HermitianMatrix, sigma: &HermitianMatrix) -> Result<f64, QError> {
    if rho.dim() != sigma.dim() {
        return Err(QError::DimensionMismatch { expected: rho.dim(), found: sigma.dim() });
    }
    let er = eig_hermitian(rho);
    check_psd(&er)?;
    let es = eig_hermitian(sigma);
    check_psd(&es)?;
    let first: f64 = er.values.iter().map(|&x| xlog2x(x)).sum();
    let mut cross = 0.0;
    let mut outside = 0.0;
    for k in 0..es.values.len() {
        let w = es.vector(k);
        let rw = rho.as_matrix().apply(&w);
        let weight: f64 = w.iter().zip(&rw).map(|(a, b)| (a.conj() * b).re).sum();
        if es.values[k] <= EIG_FLOOR {
            outside += weight;
        } else {
            cross += weight * es.values[k].log2();
        }
    }
    if outside > 1e-9 {
        return Err(QError::SupportViolation { weight: outside });
    }
    Ok(first - cross)
}

/// Logarithm base two restricted to the support: eigenvalues at or below
/// the floor map to 0.
pub fn log2_on_support(m: &HermitianMatrix) -> Result<HermitianMatrix, QError> {
    let e = eig_hermitian(m);
    check_psd(&e)?;
    Ok(e.map(|x| if x <= EIG_FLOOR { 0.0 } else { x.log2() }))
}

/// Principal square root of a PSD matrix; small negative eigenvalues clamp
/// to zero.
pub fn matrix_sqrt(m: &HermitianMatrix) -> Result<HermitianMatrix, QError> {
    let e = eig_hermitian(m);
    check_psd(&e)?;
    Ok(e.map(|x| x.max(0.0).sqrt()))
}

/// H(A|B) = H(AB) − H(B) with A = `target` and B = `conditioning`.
pub fn conditional_entropy(
    rho: &HermitianMatrix,
    layout: &SystemLayout,
    target: &[usize],
    conditioning: &[usize],
) -> Result<f64, QError> {
    let mut joint: Vec<usize> = target.iter().chain(conditioning).copied().collect();
    joint.sort_unstable();
    joint.dedup();
    let h_ab = von_neumann_entropy(&partial_trace(rho, layout, &joint)?)?;
    if conditioning.is_empty() {
        return Ok(h_ab);
    }
    let h_b = von_neumann_entropy(&partial_trace(rho, layout, conditioning)?)?;
    Ok(h_ab - h_b)
}

/// Binary entropy in bits, h(0) = h(1) = 0.
pub fn binary_entropy(x: f64) -> Result<f64, QError> {
    if !(-1e-12..=1.0 + 1e-12).contains(&x) {
        return Err(QError::OutOfRange { value: x });
    }
    Ok(h2(x.clamp(0.0, 1.0)))
}

/// Unchecked binary entropy for arguments already known to lie in [0, 1].
pub(crate) fn h2(x: f64) -> f64 {
    let term = |p: f64| if p <= 0.0 { 0.0 } else { -p * p.log2() };
    term(x) + term(1.0 - x)
}
