//! The convex objective ψ ↦ D(ν¹(ψ) ‖ P_S ν¹(ψ)) − λ·ν_C(ψ) and the reduced
//! form used when the data rounds admit the pinching shortcut.

use crate::protocol::ConstraintOperators;
use crate::qcore::{eig_hermitian, pinch, CMatrix, HermitianMatrix};

use super::TradeoffError;

/// Eigenvalues are clamped here before taking logarithms for gradients.
/// Directions in the structural kernel of ν¹ are annihilated by the adjoint,
/// so the clamp only matters for their (negligible) numerical leakage.
const LOG_CLAMP: f64 = 1e-100;

/// Which entropy expression the objective uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Relative entropy of the full ν¹ against its S-pinching; λ ranges over C.
    Full,
    /// Data-round pinching of the Kraus-reduced state; λ ranges over the
    /// tested symbols only.
    Reduced,
}

/// The objective for a fixed λ, ready for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Problem<'a> {
    pub ops: &'a ConstraintOperators,
    pub kind: ObjectiveKind,
    pub lambda: Vec<f64>,
    linear_part: HermitianMatrix,
}

/// (tr X log₂X, log₂X) from one eigendecomposition.
fn xlogx_and_log(x: &HermitianMatrix) -> (f64, HermitianMatrix) {
    let e = eig_hermitian(x);
    let value = e.values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum();
    (value, e.map(|v| v.max(LOG_CLAMP).log2()))
}

fn xlogx(x: &HermitianMatrix) -> f64 {
    eig_hermitian(x).values.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum()
}

impl<'a> Problem<'a> {
    pub fn new(ops: &'a ConstraintOperators, kind: ObjectiveKind, lambda: &[f64]) -> Result<Self, TradeoffError> {
        let stat_ops = Self::stat_ops_for(ops, kind)?;
        if lambda.len() != stat_ops.len() {
            return Err(TradeoffError::LambdaLength { expected: stat_ops.len(), found: lambda.len() });
        }
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(TradeoffError::NonFinite);
        }
        let mut linear_part = HermitianMatrix::zeros(ops.dpq());
        for (g, &l) in stat_ops.iter().zip(lambda) {
            linear_part.axpy(l, g);
        }
        Ok(Problem { ops, kind, lambda: lambda.to_vec(), linear_part })
    }

    /// The operators whose expectations λ multiplies.
    pub fn stat_ops_for(ops: &ConstraintOperators, kind: ObjectiveKind) -> Result<&[HermitianMatrix], TradeoffError> {
        match kind {
            ObjectiveKind::Full => Ok(&ops.gamma_ops),
            ObjectiveKind::Reduced => {
                ops.reduction.as_ref().map(|r| r.test_ops.as_slice()).ok_or(TradeoffError::NoReduction)
            }
        }
    }

    pub fn stat_ops(&self) -> &[HermitianMatrix] {
        Self::stat_ops_for(self.ops, self.kind).expect("checked at construction")
    }

    /// Σ λ_c Γ_c (or its reduced counterpart).
    pub fn linear_part(&self) -> &HermitianMatrix {
        &self.linear_part
    }

    /// Dimension of the classical registers that enter the continuity penalty.
    pub fn classical_dim(&self) -> usize {
        self.ops.d_sic()
    }

    /// The entropy term alone.
    pub fn entropy(&self, psi: &HermitianMatrix) -> Result<f64, TradeoffError> {
        self.ops.check_dim(psi)?;
        match self.kind {
            ObjectiveKind::Full => {
                let mut total = 0.0;
                for b in self.ops.nu1_blocks(psi)? {
                    total += xlogx(&b.matrix);
                    for d in b.diagonal_blocks(self.ops.dpq()) {
                        total -= xlogx(&d);
                    }
                }
                Ok(total)
            }
            ObjectiveKind::Reduced => {
                let red = self.ops.reduction.as_ref().ok_or(TradeoffError::NoReduction)?;
                let layout = self.ops.layout_pq();
                let mut total = 0.0;
                for k in &red.kraus {
                    let rho = psi.congruence(k.as_matrix());
                    total += xlogx(&rho) - xlogx(&pinch(&rho, &layout, 0)?);
                }
                Ok(total)
            }
        }
    }

    pub fn value(&self, psi: &HermitianMatrix) -> Result<f64, TradeoffError> {
        Ok(self.entropy(psi)? - self.linear_part.inner_product(psi))
    }

    pub fn value_and_gradient(&self, psi: &HermitianMatrix) -> Result<(f64, HermitianMatrix), TradeoffError> {
        self.ops.check_dim(psi)?;
        let dpq = self.ops.dpq();
        let (entropy, grad) = match self.kind {
            ObjectiveKind::Full => {
                let mut total = 0.0;
                let mut dual_blocks = Vec::with_capacity(self.ops.groups.len());
                for b in self.ops.nu1_blocks(psi)? {
                    let (v, log_b) = xlogx_and_log(&b.matrix);
                    total += v;
                    let mut x: CMatrix = log_b.into_matrix();
                    for (k, d) in b.diagonal_blocks(dpq).iter().enumerate() {
                        let (vd, log_d) = xlogx_and_log(d);
                        total -= vd;
                        for r in 0..dpq {
                            for c in 0..dpq {
                                x[(k * dpq + r, k * dpq + c)] -= log_d[(r, c)];
                            }
                        }
                    }
                    dual_blocks.push(HermitianMatrix::symmetrized(x));
                }
                (total, self.ops.nu1_adjoint(&dual_blocks))
            }
            ObjectiveKind::Reduced => {
                let red = self.ops.reduction.as_ref().ok_or(TradeoffError::NoReduction)?;
                let layout = self.ops.layout_pq();
                let mut total = 0.0;
                let mut grad = HermitianMatrix::zeros(dpq);
                for k in &red.kraus {
                    let rho = psi.congruence(k.as_matrix());
                    let (v, log_r) = xlogx_and_log(&rho);
                    let (vp, log_p) = xlogx_and_log(&pinch(&rho, &layout, 0)?);
                    total += v - vp;
                    grad = grad.add(&log_r.sub(&log_p).congruence(k.as_matrix()));
                }
                (total, grad)
            }
        };
        Ok((entropy - self.linear_part.inner_product(psi), grad.sub(&self.linear_part)))
    }
}

/// Value and gradient of the full objective at `psi`.
pub fn objective(
    ops: &ConstraintOperators,
    lambda: &[f64],
    psi: &HermitianMatrix,
) -> Result<(f64, HermitianMatrix), TradeoffError> {
    Problem::new(ops, ObjectiveKind::Full, lambda)?.value_and_gradient(psi)
}

/// Value and gradient of the reduced objective; `lambda_prime` is indexed by
/// the tested symbols.
pub fn b92_reduced_objective(
    ops: &ConstraintOperators,
    lambda_prime: &[f64],
    psi: &HermitianMatrix,
) -> Result<(f64, HermitianMatrix), TradeoffError> {
    Problem::new(ops, ObjectiveKind::Reduced, lambda_prime)?.value_and_gradient(psi)
}
