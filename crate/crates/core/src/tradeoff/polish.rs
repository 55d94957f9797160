//! Local refinement of a feasible point in the isometry chart
//! ψ(V) = Tr_E[(I⊗V)|ψ̃⟩⟨ψ̃|(I⊗V)†], V = Z(Z†Z)^{-1/2}.
//!
//! Every state with the pinned P-marginal has this form, so an unconstrained
//! quasi-Newton search over Z reaches the boundary states where Frank–Wolfe
//! stalls. The chart is not convex; it only supplies good primal points, and
//! certification still comes from the linearisation.

use crate::qcore::{c64, eig_hermitian, CMatrix, HermitianMatrix, C64};

use super::objective::Problem;
use super::optim::lbfgs;
use super::solver::EPS_PERT;
use crate::protocol::ConstraintOperators;

#[derive(Clone, Debug)]
pub struct IsometryChart {
    dp: usize,
    dq: usize,
    /// Environment dimension.
    m: usize,
    /// √s_j a_j for the Schmidt vectors of ψ̃ on P.
    weighted: Vec<Vec<C64>>,
    /// Unweighted a_j.
    alice: Vec<Vec<C64>>,
    sqrt_s: Vec<f64>,
}

impl IsometryChart {
    pub fn new(ops: &ConstraintOperators) -> Self {
        let (dp, dq) = (ops.dp, ops.dq);
        let e = eig_hermitian(&ops.alice_marginal);
        let cut = 1e-12 * e.max().max(1e-300);
        let mut weighted = Vec::new();
        let mut alice = Vec::new();
        let mut sqrt_s = Vec::new();
        for k in (0..dp).rev() {
            if e.values[k] > cut {
                let a = e.vector(k);
                let r = e.values[k].sqrt();
                weighted.push(a.iter().map(|x| x * r).collect());
                alice.push(a);
                sqrt_s.push(r);
            }
        }
        IsometryChart { dp, dq, m: dp * dq, weighted, alice, sqrt_s }
    }

    fn k(&self) -> usize {
        self.sqrt_s.len()
    }

    /// Number of real parameters.
    pub fn len(&self) -> usize {
        2 * self.dq * self.m * self.k()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn unpack(&self, x: &[f64]) -> CMatrix {
        let (rows, cols) = (self.dq * self.m, self.k());
        let half = rows * cols;
        CMatrix::from_fn(rows, cols, |r, c| c64(x[r * cols + c], x[half + r * cols + c]))
    }

    fn pack(&self, z: &CMatrix) -> Vec<f64> {
        let mut out: Vec<f64> = z.data().iter().map(|v| v.re).collect();
        out.extend(z.data().iter().map(|v| v.im));
        out
    }

    /// Ψ with ψ = ΨΨ†, rows (p, q), columns e.
    fn purification(&self, v: &CMatrix) -> CMatrix {
        let (dp, dq, m) = (self.dp, self.dq, self.m);
        CMatrix::from_fn(dp * dq, m, |row, e| {
            let (p, q) = (row / dq, row % dq);
            (0..self.k()).map(|j| self.weighted[j][p] * v[(q * m + e, j)]).sum()
        })
    }

    /// Polar factor V = Z S^{-1/2} with S = Z†Z, plus the eigensystem of S.
    fn polar(&self, z: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
        let s = HermitianMatrix::symmetrized(z.adjoint().matmul(z));
        let e = eig_hermitian(&s);
        let inv_sqrt = e.map(|x| 1.0 / x.max(1e-300).sqrt());
        (z.matmul(inv_sqrt.as_matrix()), e.values.clone(), e.vectors.clone())
    }

    pub fn state(&self, x: &[f64]) -> HermitianMatrix {
        let (v, _, _) = self.polar(&self.unpack(x));
        let psi = self.purification(&v);
        HermitianMatrix::symmetrized(psi.matmul_adj(&psi))
    }

    /// Chart coordinates of a feasible state.
    pub fn coordinates(&self, psi: &HermitianMatrix) -> Vec<f64> {
        let (dp, dq, m) = (self.dp, self.dq, self.m);
        let e = eig_hermitian(psi);
        // purification columns √λ_e |v_e⟩
        let big = CMatrix::from_fn(dp * dq, m, |row, col| e.vectors[(row, col)] * e.values[col].max(0.0).sqrt());
        let v = CMatrix::from_fn(dq * m, self.k(), |row, j| {
            let (q, col) = (row / m, row % m);
            (0..dp).map(|p| self.alice[j][p].conj() * big[(p * dq + q, col)]).sum::<C64>() / self.sqrt_s[j]
        });
        self.pack(&v)
    }

    /// Value at ψ_ε(x) and its gradient in chart coordinates.
    fn value_and_gradient(&self, problem: &Problem, x: &[f64], grad: &mut [f64]) -> f64 {
        let z = self.unpack(x);
        let (v, s_vals, s_vecs) = self.polar(&z);
        let psi_m = self.purification(&v);
        let psi = HermitianMatrix::symmetrized(psi_m.matmul_adj(&psi_m));
        let d = psi.dim();
        let rho = psi.mix(&HermitianMatrix::identity(d).scale(1.0 / d as f64), EPS_PERT);
        let Ok((value, g)) = problem.value_and_gradient(&rho) else {
            grad.iter_mut().for_each(|x| *x = 0.0);
            return f64::INFINITY;
        };
        let (dp, dq, m, k) = (self.dp, self.dq, self.m, self.k());
        // ∂/∂Ψ̄ of f(ΨΨ†) is 2∇fΨ, scaled by 1−ε from the perturbation
        let g_psi = g.as_matrix().matmul(&psi_m).scale(c64(2.0 * (1.0 - EPS_PERT), 0.0));
        let g_v = CMatrix::from_fn(dq * m, k, |row, j| {
            let (q, e) = (row / m, row % m);
            (0..dp).map(|p| self.weighted[j][p].conj() * g_psi[(p * dq + q, e)]).sum()
        });
        // back through V = Z S^{-1/2} (Daleckii–Krein for S^{-1/2})
        let inv_sqrt: Vec<f64> = s_vals.iter().map(|x| 1.0 / x.max(1e-300).sqrt()).collect();
        let s_inv_sqrt =
            CMatrix::from_fn(k, k, |a, b| (0..k).map(|t| s_vecs[(a, t)] * inv_sqrt[t] * s_vecs[(b, t)].conj()).sum());
        let h = s_vecs.adjoint().matmul(&z.adjoint().matmul(&g_v)).matmul(&s_vecs);
        let f_dd = |a: usize, b: usize| {
            let (la, lb) = (s_vals[a].max(1e-300), s_vals[b].max(1e-300));
            if (la - lb).abs() <= 1e-12 * la.max(lb) {
                -0.5 * la.powf(-1.5)
            } else {
                (inv_sqrt[a] - inv_sqrt[b]) / (la - lb)
            }
        };
        let fh = CMatrix::from_fn(k, k, |a, b| h[(a, b)] * f_dd(a, b));
        let kmat = s_vecs.matmul(&fh).matmul(&s_vecs.adjoint());
        let sym = kmat.add(&kmat.adjoint());
        let g_z = g_v.matmul(&s_inv_sqrt).add(&z.matmul(&sym));
        grad.copy_from_slice(&self.pack(&g_z));
        value
    }

    /// Quasi-Newton descent from `start`; returns the better of the start
    /// and the refined point.
    pub fn refine(&self, problem: &Problem, start: &HermitianMatrix, max_iter: usize) -> HermitianMatrix {
        let x0 = self.coordinates(start);
        let (x, _) = lbfgs(|x, g| self.value_and_gradient(problem, x, g), &x0, 10, max_iter, 1e-12);
        self.state(&x)
    }
}
