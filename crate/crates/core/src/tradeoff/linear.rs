//! Certified minimisation of tr(wψ) over states with a pinned P-marginal.
//!
//! The dual is max_Y tr(ρ_P Y) + λ_min(w − Y⊗I). Any Y gives a valid bound
//! after the eigenvalue shift, so Y is searched on a log-sum-exp smoothing of
//! λ_min with decreasing temperature. The smoothed eigenprojector mixture is
//! then a near-optimal primal point.

use crate::qcore::{c64, eig_hermitian, CMatrix, Eigen, HermitianMatrix};

use super::optim::lbfgs;

/// Result of one linear minimisation.
#[derive(Clone, Debug)]
pub struct LinearBound {
    /// Certified lower bound on tr(wψ) over the feasible set.
    pub bound: f64,
    /// Feasible state whose value sits close to `bound`.
    pub minimizer: HermitianMatrix,
    /// Shifted dual variable Y + μI on P; w − Y⊗I ⪰ 0 on the marginal's
    /// support.
    pub dual: HermitianMatrix,
}

/// The feasible set {ψ ⪰ 0 : Tr_Q ψ = ρ_P}, restricted to the support of ρ_P.
#[derive(Clone, Debug)]
pub struct MarginalConstraint {
    dq: usize,
    /// Isometry from the reduced P space into P (identity when ρ_P is full rank).
    basis: CMatrix,
    /// ρ_P in the reduced basis.
    rho: HermitianMatrix,
    /// basis ⊗ I_Q.
    lift: CMatrix,
    rho_sqrt: HermitianMatrix,
}

/// Temperatures of the smoothing, relative to the spectral spread of w.
const LEVELS: [f64; 9] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9];
/// First level used when a warm start is supplied.
const WARM_LEVEL: usize = 4;

impl MarginalConstraint {
    pub fn new(marginal: &HermitianMatrix, dq: usize) -> Self {
        let dp = marginal.dim();
        let e = eig_hermitian(marginal);
        let cut = 1e-12 * e.max().max(1e-300);
        let keep: Vec<usize> = (0..dp).filter(|&k| e.values[k] > cut).collect();
        let (basis, rho) = if keep.len() == dp {
            (CMatrix::identity(dp), marginal.clone())
        } else {
            let basis = CMatrix::from_fn(dp, keep.len(), |r, c| e.vectors[(r, keep[c])]);
            let rho = HermitianMatrix::from_real_diagonal(&keep.iter().map(|&k| e.values[k]).collect::<Vec<_>>());
            (basis, rho)
        };
        let lift = basis.kron(&CMatrix::identity(dq));
        let rho_sqrt = eig_hermitian(&rho).map(|x| x.max(0.0).sqrt());
        MarginalConstraint { dq, basis, rho, lift, rho_sqrt }
    }

    /// Dimension of the reduced P space.
    pub fn rank(&self) -> usize {
        self.rho.dim()
    }

    fn reduce(&self, w: &HermitianMatrix) -> HermitianMatrix {
        HermitianMatrix::symmetrized(self.lift.adjoint().matmul(w.as_matrix()).matmul(&self.lift))
    }

    fn expand(&self, x: &HermitianMatrix) -> HermitianMatrix {
        x.congruence(&self.lift)
    }

    fn partial_trace_q(&self, x: &CMatrix) -> CMatrix {
        let (r, dq) = (self.rank(), self.dq);
        CMatrix::from_fn(r, r, |a, b| (0..dq).map(|q| x[(a * dq + q, b * dq + q)]).sum())
    }

    fn shifted(&self, w: &HermitianMatrix, y: &HermitianMatrix) -> HermitianMatrix {
        let yi = y.as_matrix().kron(&CMatrix::identity(self.dq));
        HermitianMatrix::symmetrized(w.as_matrix().sub(&yi))
    }

    /// Smoothed dual value and its gradient ρ − Tr_Q Π at temperature t.
    fn smoothed(&self, w: &HermitianMatrix, y: &HermitianMatrix, t: f64) -> (f64, CMatrix, Eigen, Vec<f64>) {
        let e = eig_hermitian(&self.shifted(w, y));
        let lmin = e.min();
        let weights: Vec<f64> = e.values.iter().map(|&l| (-(l - lmin) / t).exp()).collect();
        let z: f64 = weights.iter().sum();
        let pi: Vec<f64> = weights.iter().map(|x| x / z).collect();
        let value = self.rho.inner_product(y) + lmin - t * z.ln();
        let proj = mixture(&e, &pi);
        let grad = self.rho.as_matrix().sub(&self.partial_trace_q(&proj));
        (value, grad, e, pi)
    }

    /// Minimises tr(wψ) over the feasible set. `warm` is a reduced dual
    /// parameter vector from an earlier call; the returned vector can seed
    /// the next one.
    pub fn solve(&self, w: &HermitianMatrix, warm: Option<&[f64]>) -> (LinearBound, Vec<f64>) {
        let r = self.rank();
        let wr = self.reduce(w);
        let spectrum = eig_hermitian(&wr);
        let spread = (spectrum.max() - spectrum.min()).max(1e-12);

        let (mut x, first) = match warm {
            Some(v) if v.len() == r * r => (v.to_vec(), WARM_LEVEL),
            _ => (to_params(&self.blockwise_start(&wr)), 0),
        };
        for &level in &LEVELS[first..] {
            let t = level * spread;
            let fg = |p: &[f64], g: &mut [f64]| {
                let (v, grad, _, _) = self.smoothed(&wr, &from_params(p, r), t);
                let gp = grad_params(&grad);
                for (gi, v) in g.iter_mut().zip(gp) {
                    *gi = -v;
                }
                -v
            };
            x = lbfgs(fg, &x, 8, 200, 1e-11).0;
        }
        let y = from_params(&x, r);
        let t_final = LEVELS[LEVELS.len() - 1] * spread;
        let (_, _, e, pi) = self.smoothed(&wr, &y, t_final);
        let mu = e.min();
        let bound = self.rho.inner_product(&y) + mu;

        let minimizer = self.expand(&self.feasible_from(&mixture(&e, &pi)));
        let shifted_y = y.add(&HermitianMatrix::identity(r).scale(mu));
        let dual = shifted_y.congruence(&self.basis);
        (LinearBound { bound, minimizer, dual }, x)
    }

    /// Y₀ with the minimum eigenvalue of each diagonal P-block of w on its
    /// diagonal.
    fn blockwise_start(&self, wr: &HermitianMatrix) -> HermitianMatrix {
        let (r, dq) = (self.rank(), self.dq);
        let diag: Vec<f64> = (0..r)
            .map(|p| {
                let idx: Vec<usize> = (p * dq..(p + 1) * dq).collect();
                eig_hermitian(&HermitianMatrix::symmetrized(wr.as_matrix().select(&idx, &idx))).min()
            })
            .collect();
        HermitianMatrix::from_real_diagonal(&diag)
    }

    /// Maps a PSD operator on the reduced space onto the feasible set with
    /// (A⊗I)Π(A⊗I)†, A = ρ^{1/2}(Tr_Q Π)^{-1/2}, after a tiny admixture of
    /// the identity that keeps Tr_Q Π invertible.
    fn feasible_from(&self, pi: &CMatrix) -> HermitianMatrix {
        let n = pi.rows();
        let pi =
            HermitianMatrix::symmetrized(pi.clone()).mix(&HermitianMatrix::identity(n).scale(1.0 / n as f64), 1e-13);
        let marg = eig_hermitian(&HermitianMatrix::symmetrized(self.partial_trace_q(pi.as_matrix())));
        let inv_sqrt = marg.map(|x| 1.0 / x.max(1e-300).sqrt());
        let a = self.rho_sqrt.as_matrix().matmul(inv_sqrt.as_matrix());
        pi.congruence(&a.kron(&CMatrix::identity(self.dq)))
    }
}

fn mixture(e: &Eigen, weights: &[f64]) -> CMatrix {
    let n = weights.len();
    let mut out = CMatrix::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        if w < 1e-300 {
            continue;
        }
        let v = e.vector(k);
        for a in 0..n {
            let va = v[a] * w;
            for b in 0..n {
                out[(a, b)] += va * v[b].conj();
            }
        }
    }
    out
}

/// Real coordinates of a Hermitian matrix: diagonal, then Re and Im of the
/// strict upper triangle.
fn to_params(y: &HermitianMatrix) -> Vec<f64> {
    let r = y.dim();
    let mut out: Vec<f64> = (0..r).map(|p| y[(p, p)].re).collect();
    for p in 0..r {
        for q in p + 1..r {
            out.push(y[(p, q)].re);
            out.push(y[(p, q)].im);
        }
    }
    out
}

fn from_params(x: &[f64], r: usize) -> HermitianMatrix {
    let mut m = CMatrix::zeros(r, r);
    for p in 0..r {
        m[(p, p)] = c64(x[p], 0.0);
    }
    let mut k = r;
    for p in 0..r {
        for q in p + 1..r {
            m[(p, q)] = c64(x[k], x[k + 1]);
            m[(q, p)] = c64(x[k], -x[k + 1]);
            k += 2;
        }
    }
    HermitianMatrix::symmetrized(m)
}

/// Coordinates of the gradient of Y ↦ tr(G Y) in the `to_params` chart.
fn grad_params(g: &CMatrix) -> Vec<f64> {
    let r = g.rows();
    let mut out: Vec<f64> = (0..r).map(|p| g[(p, p)].re).collect();
    for p in 0..r {
        for q in p + 1..r {
            let h = (g[(p, q)] + g[(q, p)].conj()) * 0.5;
            out.push(2.0 * h.re);
            out.push(2.0 * h.im);
        }
    }
    out
}

/// Certified lower bound on min tr(wψ) over {ψ ⪰ 0 : Tr_Q ψ = marginal}.
pub fn lin_lower_bound(w: &HermitianMatrix, alice_marginal: &HermitianMatrix) -> LinearBound {
    let dq = w.dim() / alice_marginal.dim();
    MarginalConstraint::new(alice_marginal, dq).solve(w, None).0
}
