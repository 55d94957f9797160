//! Frank–Wolfe minimisation of the objective with a certified lower bound
//! from the linearisation at the final iterate.

use serde::{Deserialize, Serialize};

use crate::qcore::{h2, HermitianMatrix};

use super::linear::MarginalConstraint;
use super::objective::{ObjectiveKind, Problem};
use super::optim::golden_section;
use super::polish::IsometryChart;
use super::TradeoffError;
use crate::protocol::ConstraintOperators;

/// Weight of the maximally mixed admixture at which gradients are taken.
pub const EPS_PERT: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Objective at the returned feasible point.
    pub upper_value: f64,
    /// Certified lower bound on the infimum, penalty included.
    pub certified_lower: f64,
    pub gap: f64,
    pub iterations: usize,
    pub perturbation_penalty: f64,
}

/// Continuity penalty for evaluating at ψ_ε instead of ψ.
pub fn perturbation_penalty(eps: f64, d_sic: usize) -> f64 {
    2.0 * eps * (d_sic as f64).log2() + (1.0 + eps) * h2(eps / (1.0 + eps))
}

fn perturb(psi: &HermitianMatrix, eps: f64) -> HermitianMatrix {
    let d = psi.dim();
    psi.mix(&HermitianMatrix::identity(d).scale(1.0 / d as f64), eps)
}

/// Reusable solver state for one operator bundle.
#[derive(Clone, Debug)]
pub struct Solver<'a> {
    ops: &'a ConstraintOperators,
    constraint: MarginalConstraint,
    chart: IsometryChart,
    /// Quasi-Newton iterations in the isometry chart before Frank–Wolfe.
    pub polish_iter: usize,
}

/// Certified lower bound at a point: the linearisation at ψ_ε minimised over
/// the feasible set, less the perturbation penalty, with the linear
/// minimiser for reuse as a Frank–Wolfe vertex.
struct Certificate {
    lower: f64,
    direction: HermitianMatrix,
    warm: Vec<f64>,
}

impl<'a> Solver<'a> {
    pub fn new(ops: &'a ConstraintOperators) -> Self {
        Solver {
            ops,
            constraint: MarginalConstraint::new(&ops.alice_marginal, ops.dq),
            chart: IsometryChart::new(ops),
            polish_iter: 500,
        }
    }

    pub fn ops(&self) -> &'a ConstraintOperators {
        self.ops
    }

    pub fn constraint(&self) -> &MarginalConstraint {
        &self.constraint
    }

    fn certify(
        &self,
        problem: &Problem,
        psi: &HermitianMatrix,
        warm: Option<&[f64]>,
    ) -> Result<Certificate, TradeoffError> {
        let rho = perturb(psi, EPS_PERT);
        let (value, grad) = problem.value_and_gradient(&rho)?;
        let (lin, warm) = self.constraint.solve(&grad, warm);
        let penalty = perturbation_penalty(EPS_PERT, problem.classical_dim());
        let lower = value - grad.inner_product(&rho) + lin.bound - penalty;
        Ok(Certificate { lower, direction: lin.minimizer, warm })
    }

    /// Frank–Wolfe from `start` with exact line search. Stops when the
    /// certified gap drops to `tol` or after `max_iter` iterations.
    pub fn frank_wolfe(
        &self,
        problem: &Problem,
        start: &HermitianMatrix,
        tol: f64,
        max_iter: usize,
    ) -> Result<(HermitianMatrix, SolveReport), TradeoffError> {
        let penalty = perturbation_penalty(EPS_PERT, problem.classical_dim());
        let mut psi = start.clone();
        let mut warm: Option<Vec<f64>> = None;
        let mut best_lower = f64::NEG_INFINITY;
        let mut iterations = 0;
        let eval = |x: &HermitianMatrix| problem.value(&perturb(x, EPS_PERT));
        let mut current = eval(&psi)?;
        loop {
            if tol.is_infinite() {
                break;
            }
            let cert = self.certify(problem, &psi, warm.as_deref())?;
            best_lower = best_lower.max(cert.lower);
            warm = Some(cert.warm);
            if current - best_lower <= tol || iterations >= max_iter {
                break;
            }
            let dir = cert.direction;
            let mut failed = None;
            let (tau, value) = golden_section(
                |t| match eval(&psi.mix(&dir, t)) {
                    Ok(v) => v,
                    Err(e) => {
                        failed = Some(e);
                        f64::INFINITY
                    }
                },
                0.0,
                1.0,
                1e-12,
            );
            if let Some(e) = failed {
                return Err(e);
            }
            iterations += 1;
            if value < current {
                psi = psi.mix(&dir, tau);
                current = value;
            } else if tau > 0.0 {
                // no descent along the direction; a zero step is the last resort
                break;
            }
        }
        let upper = current;
        let lower = if best_lower.is_finite() { best_lower } else { f64::NEG_INFINITY };
        Ok((
            psi,
            SolveReport {
                upper_value: upper,
                certified_lower: lower,
                gap: upper - lower,
                iterations,
                perturbation_penalty: penalty,
            },
        ))
    }

    /// Certified c_λ: the best lower bound found while minimising from the
    /// maximally mixed feasible completion, first in the isometry chart and
    /// then by Frank–Wolfe.
    pub fn certified_c(
        &self,
        kind: ObjectiveKind,
        lambda: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<(f64, HermitianMatrix, SolveReport), TradeoffError> {
        let problem = Problem::new(self.ops, kind, lambda)?;
        let mut start = self.ops.mixed_completion();
        if self.polish_iter > 0 {
            start = self.chart.refine(&problem, &start, self.polish_iter);
        }
        let (psi, report) = self.frank_wolfe(&problem, &start, tol, max_iter)?;
        Ok((report.certified_lower, psi, report))
    }
}

/// Frank–Wolfe on the full objective.
pub fn frank_wolfe(
    ops: &ConstraintOperators,
    lambda: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(HermitianMatrix, SolveReport), TradeoffError> {
    let problem = Problem::new(ops, ObjectiveKind::Full, lambda)?;
    Solver::new(ops).frank_wolfe(&problem, &ops.mixed_completion(), tol, max_iter)
}

/// Certified c_λ for the full objective.
pub fn certified_c_lambda(
    ops: &ConstraintOperators,
    lambda: &[f64],
    tol: f64,
) -> Result<(f64, SolveReport), TradeoffError> {
    let (c, _, report) = Solver::new(ops).certified_c(ObjectiveKind::Full, lambda, tol, DEFAULT_MAX_ITER)?;
    Ok((c, report))
}

pub const DEFAULT_MAX_ITER: usize = 10_000;
