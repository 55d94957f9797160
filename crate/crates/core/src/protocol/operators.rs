//! Source replacement and the measurement operators of the convex program.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::qcore::random::random_density;
use crate::qcore::{
    c64, eig_hermitian, matrix_sqrt, partial_trace, CMatrix, HermitianMatrix, SystemLayout, C64, MAX_DIM,
};

use super::spec::ProtocolSpec;
use super::ProtocolError;

/// One non-zero operator M^(s,i,c) on P⊗Q together with its square root.
#[derive(Clone, Debug)]
pub struct MeasurementOp {
    pub s: usize,
    pub i: usize,
    pub c: usize,
    pub op: HermitianMatrix,
    pub sqrt: HermitianMatrix,
}

/// The operators sharing one (i, c) pair; ν¹ is block diagonal over these.
#[derive(Clone, Debug)]
pub struct BlockGroup {
    pub i: usize,
    pub c: usize,
    /// Indices into `ConstraintOperators::m_ops`, in increasing s.
    pub members: Vec<usize>,
}

/// Data-round shortcut for protocols whose sifting announcement does not
/// depend on Alice's input (B92-like). On each kept announcement the raw key
/// equals Alice's input, so the entropy reduces to a pinching of P.
#[derive(Clone, Debug)]
pub struct DataReduction {
    /// I⊗K_i with K_i² the untested outcomes announced as i.
    pub kraus: Vec<HermitianMatrix>,
    /// Γ_c/γ for every tested symbol c, in `test_symbols` order.
    pub test_ops: Vec<HermitianMatrix>,
    /// Positions in C of the tested symbols.
    pub test_symbols: Vec<usize>,
}

/// Everything the solver needs from a protocol: the M and Γ operators, the
/// source-replaced state and Alice's pinned marginal.
#[derive(Clone, Debug)]
pub struct ConstraintOperators {
    pub dp: usize,
    pub dq: usize,
    pub ds: usize,
    pub di: usize,
    pub dc: usize,
    pub gamma: f64,
    pub m_ops: Vec<MeasurementOp>,
    pub groups: Vec<BlockGroup>,
    pub gamma_ops: Vec<HermitianMatrix>,
    pub source_pure: Vec<C64>,
    pub alice_marginal: HermitianMatrix,
    pub c_labels: Vec<String>,
    pub untested: Option<usize>,
    pub reduction: Option<DataReduction>,
}

/// Probability vector over the statistics alphabet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatisticsVector {
    pub labels: Vec<String>,
    pub probs: Vec<f64>,
}

impl StatisticsVector {
    pub fn get(&self, label: &str) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|k| self.probs[k])
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// One block of ν¹: the (i, c) sector on P⊗Q⊗S restricted to the raw-key
/// values that occur in it. Index order is s-major: row = k·d_PQ + pq where k
/// is the position of s in `s_values`.
#[derive(Clone, Debug)]
pub struct Nu1Block {
    pub i: usize,
    pub c: usize,
    pub s_values: Vec<usize>,
    pub matrix: HermitianMatrix,
}

impl Nu1Block {
    /// The pinched diagonal blocks √M^(s) ψ √M^(s), one per s.
    pub fn diagonal_blocks(&self, dpq: usize) -> Vec<HermitianMatrix> {
        (0..self.s_values.len())
            .map(|k| {
                let idx: Vec<usize> = (k * dpq..(k + 1) * dpq).collect();
                HermitianMatrix::symmetrized(self.matrix.as_matrix().select(&idx, &idx))
            })
            .collect()
    }
}

pub fn source_replacement(spec: &ProtocolSpec) -> Result<ConstraintOperators, ProtocolError> {
    spec.validate()?;
    let dp = spec.source.len();
    let dq = spec.dim_q();
    let dpq = dp * dq;
    if dpq > MAX_DIM {
        return Err(ProtocolError::TooLarge(dpq));
    }
    let (ds, di, dc) = (spec.s_labels.len(), spec.i_labels.len(), spec.c_labels.len());

    let mut source_pure = vec![c64(0.0, 0.0); dpq];
    for (u, s) in spec.source.iter().enumerate() {
        let w = s.prob.sqrt();
        for (q, amp) in s.state.iter().enumerate() {
            source_pure[u * dq + q] = amp * w;
        }
    }
    let layout = SystemLayout::new(vec![dp, dq])?;
    let alice_marginal = partial_trace(&HermitianMatrix::projector(&source_pure), &layout, &[0])?;

    // M^(s,i,c) = Σ |u⟩⟨u| ⊗ N^(v) over (u, v) consistent with (s, i, c)
    let mut acc: Vec<Option<CMatrix>> = vec![None; ds * di * dc];
    for u in 0..dp {
        for (v, pov) in spec.povm.iter().enumerate() {
            let i = spec.pd[u][v];
            let s = spec.rk[u][i];
            let c = spec.ev[v][i][s];
            let slot = acc[(s * di + i) * dc + c].get_or_insert_with(|| CMatrix::zeros(dpq, dpq));
            for a in 0..dq {
                for b in 0..dq {
                    slot[(u * dq + a, u * dq + b)] += pov.element[(a, b)];
                }
            }
        }
    }
    let mut m_ops = Vec::new();
    for s in 0..ds {
        for i in 0..di {
            for c in 0..dc {
                if let Some(m) = acc[(s * di + i) * dc + c].take() {
                    let op = HermitianMatrix::symmetrized(m);
                    if op.as_matrix().norm() <= 1e-14 {
                        continue;
                    }
                    let sqrt = matrix_sqrt(&op)?;
                    m_ops.push(MeasurementOp { s, i, c, op, sqrt });
                }
            }
        }
    }
    let mut groups: Vec<BlockGroup> = Vec::new();
    for i in 0..di {
        for c in 0..dc {
            let members: Vec<usize> = (0..m_ops.len()).filter(|&k| m_ops[k].i == i && m_ops[k].c == c).collect();
            if !members.is_empty() {
                groups.push(BlockGroup { i, c, members });
            }
        }
    }
    let mut gamma_ops = vec![HermitianMatrix::zeros(dpq); dc];
    for m in &m_ops {
        gamma_ops[m.c] = gamma_ops[m.c].add(&m.op);
    }

    let reduction = data_reduction(spec, &gamma_ops, dp, dq)?;
    Ok(ConstraintOperators {
        dp,
        dq,
        ds,
        di,
        dc,
        gamma: spec.gamma,
        m_ops,
        groups,
        gamma_ops,
        source_pure,
        alice_marginal,
        c_labels: spec.c_labels.clone(),
        untested: spec.untested,
        reduction,
    })
}

/// Builds the data-round shortcut when the protocol admits it: an untested
/// symbol exists with Γ ∝ I, announcements of untested outcomes ignore u,
/// and each announcement either reveals u through the raw key or fixes it.
fn data_reduction(
    spec: &ProtocolSpec,
    gamma_ops: &[HermitianMatrix],
    dp: usize,
    dq: usize,
) -> Result<Option<DataReduction>, ProtocolError> {
    let Some(unt) = spec.untested else {
        return Ok(None);
    };
    let dpq = dp * dq;
    let expected = HermitianMatrix::identity(dpq).scale(1.0 - spec.gamma);
    if gamma_ops[unt].max_abs_diff(&expected) > 1e-10 {
        return Ok(None);
    }
    let untested_v: Vec<usize> =
        (0..spec.povm.len()).filter(|&v| spec.ev[v].iter().all(|row| row.iter().all(|&c| c == unt))).collect();
    let mut kraus = Vec::new();
    for i in 0..spec.i_labels.len() {
        let keys: Vec<usize> = (0..dp).map(|u| spec.rk[u][i]).collect();
        let constant = keys.iter().all(|&s| s == keys[0]);
        let mut distinct = keys.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let injective = distinct.len() == dp;
        if constant && dp > 1 {
            continue;
        }
        if !injective {
            return Ok(None);
        }
        let mut k2 = HermitianMatrix::zeros(dq);
        for &v in &untested_v {
            let ann: Vec<usize> = (0..dp).map(|u| spec.pd[u][v]).collect();
            if ann.iter().any(|&a| a != ann[0]) {
                return Ok(None);
            }
            if ann[0] == i {
                k2 = k2.add(&spec.povm[v].element);
            }
        }
        let k = matrix_sqrt(&k2)?;
        kraus.push(HermitianMatrix::symmetrized(CMatrix::identity(dp).kron(k.as_matrix())));
    }
    let test_symbols: Vec<usize> = (0..spec.c_labels.len()).filter(|&c| c != unt).collect();
    let test_ops = test_symbols.iter().map(|&c| gamma_ops[c].scale(1.0 / spec.gamma)).collect();
    Ok(Some(DataReduction { kraus, test_ops, test_symbols }))
}

impl ConstraintOperators {
    pub fn dpq(&self) -> usize {
        self.dp * self.dq
    }

    /// Dimension of the classical registers S⊗I⊗C.
    pub fn d_sic(&self) -> usize {
        self.ds * self.di * self.dc
    }

    pub fn layout_pq(&self) -> SystemLayout {
        SystemLayout::new(vec![self.dp, self.dq]).expect("positive dims")
    }

    pub fn check_dim(&self, psi: &HermitianMatrix) -> Result<(), ProtocolError> {
        if psi.dim() != self.dpq() {
            return Err(ProtocolError::DimensionMismatch { expected: self.dpq(), found: psi.dim() });
        }
        Ok(())
    }

    /// ν¹ as its non-zero (i, c) blocks.
    pub fn nu1_blocks(&self, psi: &HermitianMatrix) -> Result<Vec<Nu1Block>, ProtocolError> {
        self.check_dim(psi)?;
        let dpq = self.dpq();
        let blocks = self
            .groups
            .iter()
            .map(|g| {
                let k = g.members.len();
                let halves: Vec<CMatrix> =
                    g.members.iter().map(|&m| self.m_ops[m].sqrt.as_matrix().matmul(psi.as_matrix())).collect();
                let mut big = CMatrix::zeros(k * dpq, k * dpq);
                for a in 0..k {
                    for b in a..k {
                        let blk = halves[a].matmul(self.m_ops[g.members[b]].sqrt.as_matrix());
                        for r in 0..dpq {
                            for c in 0..dpq {
                                big[(a * dpq + r, b * dpq + c)] = blk[(r, c)];
                                if a != b {
                                    big[(b * dpq + c, a * dpq + r)] = blk[(r, c)].conj();
                                }
                            }
                        }
                    }
                }
                Nu1Block {
                    i: g.i,
                    c: g.c,
                    s_values: g.members.iter().map(|&m| self.m_ops[m].s).collect(),
                    matrix: HermitianMatrix::symmetrized(big),
                }
            })
            .collect();
        Ok(blocks)
    }

    /// Adjoint of ψ ↦ ν¹ applied to a block-diagonal operator given as one
    /// matrix per group (in `groups` order).
    pub fn nu1_adjoint(&self, blocks: &[HermitianMatrix]) -> HermitianMatrix {
        let dpq = self.dpq();
        let mut out = CMatrix::zeros(dpq, dpq);
        for (g, x) in self.groups.iter().zip(blocks) {
            for (a, &ma) in g.members.iter().enumerate() {
                let ra: Vec<usize> = (a * dpq..(a + 1) * dpq).collect();
                for (b, &mb) in g.members.iter().enumerate() {
                    let rb: Vec<usize> = (b * dpq..(b + 1) * dpq).collect();
                    let xab = x.as_matrix().select(&ra, &rb);
                    let term = self.m_ops[ma].sqrt.as_matrix().matmul(&xab).matmul(self.m_ops[mb].sqrt.as_matrix());
                    out = out.add(&term);
                }
            }
        }
        HermitianMatrix::symmetrized(out)
    }

    /// Dense ν¹ on P⊗Q⊗S⊗I⊗C. Fails when the composite exceeds the size guard.
    pub fn nu1_dense(&self, psi: &HermitianMatrix) -> Result<HermitianMatrix, ProtocolError> {
        let dpq = self.dpq();
        let dim = dpq * self.d_sic();
        if dim > MAX_DIM {
            return Err(ProtocolError::TooLarge(dim));
        }
        let flat = |pq: usize, s: usize, i: usize, c: usize| ((pq * self.ds + s) * self.di + i) * self.dc + c;
        let mut out = CMatrix::zeros(dim, dim);
        for blk in self.nu1_blocks(psi)? {
            for (a, &sa) in blk.s_values.iter().enumerate() {
                for (b, &sb) in blk.s_values.iter().enumerate() {
                    for r in 0..dpq {
                        for c in 0..dpq {
                            out[(flat(r, sa, blk.i, blk.c), flat(c, sb, blk.i, blk.c))] =
                                blk.matrix[(a * dpq + r, b * dpq + c)];
                        }
                    }
                }
            }
        }
        Ok(HermitianMatrix::symmetrized(out))
    }

    /// Layout of the dense ν¹: P, Q, S, I, C.
    pub fn nu1_layout(&self) -> SystemLayout {
        SystemLayout::new(vec![self.dp, self.dq, self.ds, self.di, self.dc]).expect("positive dims")
    }

    pub fn statistics(&self, psi: &HermitianMatrix) -> Result<StatisticsVector, ProtocolError> {
        self.check_dim(psi)?;
        Ok(StatisticsVector {
            labels: self.c_labels.clone(),
            probs: self.gamma_ops.iter().map(|g| g.inner_product(psi)).collect(),
        })
    }

    /// |ψ̃⟩⟨ψ̃|, the honest noiseless state.
    pub fn source_state(&self) -> HermitianMatrix {
        HermitianMatrix::projector(&self.source_pure)
    }

    /// ψ̃_P ⊗ I/d_Q, the maximally mixed feasible completion.
    pub fn mixed_completion(&self) -> HermitianMatrix {
        HermitianMatrix::symmetrized(
            self.alice_marginal.as_matrix().kron(&CMatrix::identity(self.dq).scale(c64(1.0 / self.dq as f64, 0.0))),
        )
    }

    /// Honest state after a depolarising channel of strength p on Q.
    pub fn depolarized_source(&self, p: f64) -> HermitianMatrix {
        self.source_state().mix(&self.mixed_completion(), p)
    }

    /// Deviation of Tr_Q ψ from Alice's marginal (max entry).
    pub fn marginal_defect(&self, psi: &HermitianMatrix) -> f64 {
        match partial_trace(psi, &self.layout_pq(), &[0]) {
            Ok(m) => m.max_abs_diff(&self.alice_marginal),
            Err(_) => f64::INFINITY,
        }
    }

    /// Maps a PSD operator with invertible P-marginal ρ onto the feasible set
    /// via (A⊗I)·ψ·(A⊗I)† with A = ψ̃_P^{1/2} ρ^{-1/2}.
    pub fn correct_marginal(&self, psi: &HermitianMatrix) -> Result<HermitianMatrix, ProtocolError> {
        let rho = partial_trace(psi, &self.layout_pq(), &[0])?;
        let e = eig_hermitian(&rho);
        if e.min() <= 1e-12 * e.max().max(1e-300) {
            return Err(ProtocolError::SingularMarginal);
        }
        let inv_sqrt = e.map(|x| 1.0 / x.sqrt());
        let target_sqrt = matrix_sqrt(&self.alice_marginal)?;
        let a = target_sqrt.as_matrix().matmul(inv_sqrt.as_matrix());
        let big = a.kron(&CMatrix::identity(self.dq));
        Ok(psi.congruence(&big))
    }

    /// Random feasible state on P⊗Q. The rank is raised to ⌈d_P/d_Q⌉ when
    /// needed so that the P-marginal of the raw draw is invertible.
    pub fn random_feasible<R: Rng + ?Sized>(&self, rank: usize, rng: &mut R) -> HermitianMatrix {
        let rank = rank.max(self.dp.div_ceil(self.dq));
        loop {
            let raw = random_density(self.dpq(), rank, rng);
            if let Ok(psi) = self.correct_marginal(&raw) {
                return psi;
            }
        }
    }
}
