//! Choice of the tradeoff slope λ.
//!
//! The tightest affine bound at target statistics q maximises the concave
//! dual function φ(λ) = λ·q + c(λ); its maximiser is the supporting
//! hyperplane of the constrained entropy minimum at q. Any λ is sound, so
//! the search only affects tightness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::objective::ObjectiveKind;
use super::optim::{golden_section, nelder_mead};
use super::solver::Solver;
use super::TradeoffError;
use crate::protocol::ConstraintOperators;

#[derive(Clone, Debug)]
pub struct LambdaSearch {
    pub kind: ObjectiveKind,
    /// Budget of dual evaluations (each is a certified solve).
    pub max_evals: usize,
    pub solve_tol: f64,
    pub solve_max_iter: usize,
    /// Box |λ_c| ≤ bound on the free coordinates.
    pub bound: f64,
    /// Extra randomised Nelder–Mead starts.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for LambdaSearch {
    fn default() -> Self {
        LambdaSearch {
            kind: ObjectiveKind::Full,
            max_evals: 200,
            solve_tol: 1e-6,
            solve_max_iter: 2_000,
            bound: 100.0,
            restarts: 0,
            seed: 0,
        }
    }
}

/// Result of the slope search.
#[derive(Clone, Debug)]
pub struct LambdaChoice {
    pub lambda: Vec<f64>,
    /// Certified offset at `lambda`.
    pub c: f64,
    /// φ at `lambda`, i.e. the bound's value at the target statistics.
    pub value: f64,
}

/// Maximises φ over λ with the last coordinate fixed to 0 (the statistics
/// sum to one, so a common shift of λ is absorbed by c).
pub fn maximize_dual(solver: &Solver, target: &[f64], search: &LambdaSearch) -> Result<LambdaChoice, TradeoffError> {
    maximize_dual_with(
        |lambda| solver.certified_c(search.kind, lambda, search.solve_tol, search.solve_max_iter).map(|r| r.0),
        target,
        search,
    )
}

/// [`maximize_dual`] for an arbitrary certified offset map λ ↦ c(λ). Only
/// `max_evals`, `bound`, `restarts` and `seed` of `search` are used.
pub fn maximize_dual_with<F>(c_of: F, target: &[f64], search: &LambdaSearch) -> Result<LambdaChoice, TradeoffError>
where
    F: Fn(&[f64]) -> Result<f64, TradeoffError>,
{
    let n = target.len();
    if n == 0 {
        return Err(TradeoffError::LambdaLength { expected: 1, found: 0 });
    }
    let failure = std::cell::RefCell::new(None);
    let eval = |free: &[f64]| -> Option<(f64, f64)> {
        if free.iter().any(|x| x.abs() > search.bound) {
            return None;
        }
        let mut lambda = free.to_vec();
        lambda.push(0.0);
        match c_of(&lambda) {
            Ok(c) => Some((c, lambda.iter().zip(target).map(|(l, q)| l * q).sum::<f64>() + c)),
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                None
            }
        }
    };
    let mut objective = |free: &[f64]| eval(free).map_or(f64::INFINITY, |(_, v)| -v);

    let mut best: (Vec<f64>, f64) = nelder_mead(&mut objective, &vec![0.0; n - 1], 1.0, search.max_evals, 1e-10);
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    for _ in 0..search.restarts {
        let start: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let cand = nelder_mead(&mut objective, &start, 1.0, search.max_evals, 1e-10);
        if cand.1 < best.1 {
            best = cand;
        }
    }
    // coordinate polish in a fixed order with shrinking brackets
    let mut x = best.0;
    let mut fx = best.1;
    let mut width = 0.5;
    for _ in 0..3 {
        for k in 0..x.len() {
            let base = x.clone();
            let line = |t: f64| {
                let mut y = base.clone();
                y[k] = t;
                objective(&y)
            };
            let (t, ft) = golden_section(line, base[k] - width, base[k] + width, 1e-4 * width);
            if ft < fx {
                x[k] = t;
                fx = ft;
            }
        }
        width *= 0.25;
    }
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let (c, value) = eval(&x).ok_or(TradeoffError::NonFinite)?;
    let mut lambda = x;
    lambda.push(0.0);
    Ok(LambdaChoice { lambda, c, value })
}

/// Slope of a near-tight tradeoff function at the target statistics.
pub fn heuristic_lambda(
    ops: &ConstraintOperators,
    target: &[f64],
    search: &LambdaSearch,
) -> Result<Vec<f64>, TradeoffError> {
    Ok(maximize_dual(&Solver::new(ops), target, search)?.lambda)
}
