//! Oracles shared by the integration tests. They deliberately avoid the
//! library's ν¹ construction and work from the measurement operators and an
//! explicit purification instead.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pmqkd::protocol::ConstraintOperators;
use pmqkd::qcore::{c64, eig_hermitian, partial_trace, von_neumann_entropy, CMatrix, HermitianMatrix, SystemLayout};

/// Purification |Ψ⟩ on PQ⊗E with E ≅ PQ.
pub fn purification(psi: &HermitianMatrix) -> Vec<num_complex::Complex64> {
    let d = psi.dim();
    let e = eig_hermitian(psi);
    let mut out = vec![c64(0.0, 0.0); d * d];
    for k in 0..d {
        let w = e.values[k].max(0.0).sqrt();
        let v = e.vector(k);
        for a in 0..d {
            out[a * d + k] = v[a] * w;
        }
    }
    out
}

/// H(S|IEC) of the measured single-round state, from Eve's conditional
/// states Tr_PQ[(M⊗I)Ψ].
pub fn cq_conditional_entropy(ops: &ConstraintOperators, psi: &HermitianMatrix) -> f64 {
    let d = psi.dim();
    let pur = HermitianMatrix::projector(&purification(psi));
    let layout = SystemLayout::new(vec![d, d]).unwrap();
    let mut by_ic: BTreeMap<(usize, usize), HermitianMatrix> = BTreeMap::new();
    let mut h_sice = 0.0;
    for m in &ops.m_ops {
        let lifted = m.op.as_matrix().kron(&CMatrix::identity(d));
        let applied = HermitianMatrix::symmetrized(lifted.matmul(pur.as_matrix()));
        // Tr_PQ of (M⊗I)Ψ equals that of its Hermitian part
        let tau = partial_trace(&applied, &layout, &[1]).unwrap();
        h_sice += von_neumann_entropy(&tau).unwrap();
        let slot = by_ic.entry((m.i, m.c)).or_insert_with(|| HermitianMatrix::zeros(d));
        *slot = slot.add(&tau);
    }
    let h_ice: f64 = by_ic.values().map(|t| von_neumann_entropy(t).unwrap()).sum();
    h_sice - h_ice
}

/// Mixture (1 − a − b)·anchor + a·A + b·B whose three-outcome statistics
/// equal `target` exactly, with A and B drawn from `candidates`. Returns the
/// valid mixture with the largest anchor weight.
pub fn matched_mixture(
    stats: impl Fn(&HermitianMatrix) -> Vec<f64>,
    anchor: &HermitianMatrix,
    target: &[f64],
    candidates: &[HermitianMatrix],
) -> Option<HermitianMatrix> {
    let q0 = stats(anchor);
    let qs: Vec<Vec<f64>> = candidates.iter().map(&stats).collect();
    let mut best: Option<(f64, HermitianMatrix)> = None;
    for a in 0..candidates.len() {
        for b in a + 1..candidates.len() {
            // rows: first two outcomes and normalisation; columns: anchor, A, B
            let m = [[q0[0], qs[a][0], qs[b][0]], [q0[1], qs[a][1], qs[b][1]], [1.0, 1.0, 1.0]];
            let rhs = [target[0], target[1], 1.0];
            let det = det3(&m);
            if det.abs() < 1e-12 {
                continue;
            }
            let w: Vec<f64> = (0..3)
                .map(|k| {
                    let mut mk = m;
                    for r in 0..3 {
                        mk[r][k] = rhs[r];
                    }
                    det3(&mk) / det
                })
                .collect();
            if w.iter().any(|&x| x < 0.0) {
                continue;
            }
            if best.as_ref().map_or(true, |(w0, _)| w[0] > *w0) {
                let mut mix = anchor.scale(w[0]);
                mix.axpy(w[1], &candidates[a]);
                mix.axpy(w[2], &candidates[b]);
                best = Some((w[0], mix));
            }
        }
    }
    best.map(|(_, m)| m)
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
