//! Search over the testing probability γ, the tradeoff slope and the Rényi
//! order α for the longest key.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::protocol::{
    b92_preset, bb84_preset, honest_model, source_replacement, ConstraintOperators, Family, ProtocolSpec,
};
use crate::tradeoff::optim::{golden_section, nelder_mead};
use crate::tradeoff::{
    lift_test_data, maximize_dual_with, LambdaSearch, ObjectiveKind, Solver, TradeoffError, TradeoffFunction,
};

use super::bounds::{geat_terms, key_length_blocked, key_length_rhs, GeatBreakdown};
use super::completeness::{lambda_ec, threshold_k_ca, CompletenessPlan};
use super::params::SecurityParams;
use super::KeyRateError;

pub const ALPHA_MIN: f64 = 1.0 + 1e-9;
pub const ALPHA_MAX: f64 = 1.5 - 1e-9;

/// γ at which the reduced objective is solved; other γ follow by rescaling.
const GAMMA_REF: f64 = 0.5;

/// Effort spent on each tradeoff-function derivation.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverBudget {
    /// Slope-search evaluations for the asymptotic bound.
    pub dual_evals: usize,
    /// Slope-search evaluations per γ for the finite-size bound.
    pub finite_evals: usize,
    pub solve_tol: f64,
    pub solve_max_iter: usize,
    pub gamma_grid: Vec<f64>,
    /// Testing probability standing in for γ → 0 when the protocol has no
    /// reduced objective.
    pub asymptotic_gamma: f64,
}

impl Default for SolverBudget {
    fn default() -> Self {
        SolverBudget {
            dual_evals: 150,
            finite_evals: 60,
            solve_tol: 1e-9,
            solve_max_iter: 30,
            gamma_grid: default_gamma_grid(),
            asymptotic_gamma: 1e-6,
        }
    }
}

/// {0.005·2^k : −12 ≤ k ≤ 7}.
pub fn default_gamma_grid() -> Vec<f64> {
    (-12..=7).map(|k| 0.005 * 2f64.powi(k)).filter(|&g| g > 0.0 && g <= 1.0).collect()
}

/// The same protocol with a different testing probability. Custom specs
/// only exist at their own γ.
pub fn spec_at_gamma(spec: &ProtocolSpec, gamma: f64) -> Result<ProtocolSpec, KeyRateError> {
    match spec.family {
        Family::B92 => Ok(b92_preset(gamma)?),
        Family::Bb84 => Ok(bb84_preset(gamma)?),
        Family::Custom if gamma == spec.gamma => Ok(spec.clone()),
        Family::Custom => Err(KeyRateError::GammaUnavailable(gamma)),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub p: f64,
    pub n: u64,
    pub s: u64,
    /// Non-negative; 0 means no key can be extracted.
    pub key_length: i64,
    pub rate: f64,
    pub plan: CompletenessPlan,
    pub breakdown: GeatBreakdown,
    pub gamma: f64,
    pub eps_cor: f64,
    pub eps_sec: f64,
    pub tradeoff: TradeoffFunction,
    pub ca_hon: f64,
    pub h_sv: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AsymptoticResult {
    pub p: f64,
    /// CA(ν_hon) − H(S|VI).
    pub rate: f64,
    pub ca_hon: f64,
    pub h_sv: f64,
    /// Slope over the tested symbols; the last entry is pinned to 0.
    pub slope: Vec<f64>,
    pub offset: f64,
}

/// How certified offsets c(μ; γ) are obtained from the test slope μ.
enum Model {
    /// Reduced data-round objective solved once at `GAMMA_REF`, using
    /// c(μ; γ) = (1−γ)/(1−γ_ref) · c(μ(1−γ_ref)/(1−γ); γ_ref).
    Reduced(ConstraintOperators),
    /// Full objective with λ_c = μ_c/γ on tested symbols and 0 on the
    /// untested one, re-derived per γ. The untested symbol may also occur on
    /// tested rounds (BB84 basis mismatch), so no lifting is applied.
    Full(ProtocolSpec),
}

struct Setup {
    model: Model,
    test_symbols: Vec<usize>,
    test_labels: Vec<String>,
    untested_label: String,
    /// Honest distribution of the tested symbols conditioned on testing.
    q_test: Vec<f64>,
    h_sv: f64,
    d_a: usize,
}

impl Setup {
    fn new(spec: &ProtocolSpec, p: f64) -> Result<Self, KeyRateError> {
        spec.validate()?;
        let untested = spec.untested.ok_or(KeyRateError::NoTestSplit)?;
        let ref_spec = match spec.family {
            Family::Custom => spec.clone(),
            _ => spec_at_gamma(spec, GAMMA_REF)?,
        };
        let ops = source_replacement(&ref_spec)?;
        let (stats, h_sv) = honest_model(&ref_spec, p)?;
        let test_symbols: Vec<usize> = (0..spec.c_labels.len()).filter(|&c| c != untested).collect();
        let q_test = test_symbols.iter().map(|&c| stats.probs[c] / ref_spec.gamma).collect();
        let test_labels = test_symbols.iter().map(|&c| spec.c_labels[c].clone()).collect();
        let reducible =
            spec.family != Family::Custom && ops.reduction.as_ref().is_some_and(|r| r.test_symbols == test_symbols);
        let model = if reducible { Model::Reduced(ops) } else { Model::Full(spec.clone()) };
        Ok(Setup {
            model,
            test_symbols,
            test_labels,
            untested_label: spec.c_labels[untested].clone(),
            q_test,
            h_sv,
            d_a: spec.s_labels.len(),
        })
    }

    /// Runs `f` with the offset map μ ↦ c(μ; γ). γ = 0 is allowed for the
    /// reduced model.
    fn with_offsets<R>(
        &self,
        gamma: f64,
        budget: &SolverBudget,
        f: impl FnOnce(&dyn Fn(&[f64]) -> Result<f64, TradeoffError>) -> R,
    ) -> Result<R, KeyRateError> {
        let (tol, iters) = (budget.solve_tol, budget.solve_max_iter);
        match &self.model {
            Model::Reduced(ops) => {
                let solver = Solver::new(ops);
                let scale = (1.0 - gamma) / (1.0 - GAMMA_REF);
                let c_of = |mu: &[f64]| -> Result<f64, TradeoffError> {
                    let lam: Vec<f64> = mu.iter().map(|m| m / scale).collect();
                    Ok(scale * solver.certified_c(ObjectiveKind::Reduced, &lam, tol, iters)?.0)
                };
                Ok(f(&c_of))
            }
            Model::Full(spec) => {
                let spec_g = spec_at_gamma(spec, gamma)?;
                let ops = source_replacement(&spec_g)?;
                let solver = Solver::new(&ops);
                let dc = spec_g.c_labels.len();
                let c_of = |mu: &[f64]| -> Result<f64, TradeoffError> {
                    let mut lam = vec![0.0; dc];
                    for (&c, m) in self.test_symbols.iter().zip(mu) {
                        lam[c] = m / gamma;
                    }
                    Ok(solver.certified_c(ObjectiveKind::Full, &lam, tol, iters)?.0)
                };
                Ok(f(&c_of))
            }
        }
    }

    fn tradeoff(&self, mu: &[f64], c: f64, gamma: f64) -> Result<TradeoffFunction, TradeoffError> {
        match &self.model {
            Model::Reduced(_) => {
                let g = TradeoffFunction::affine(self.test_labels.clone(), mu.to_vec(), c)?;
                lift_test_data(&g, gamma)
            }
            Model::Full(spec) => {
                let mut labels = self.test_labels.clone();
                labels.push(self.untested_label.clone());
                let mut lambda: Vec<f64> = mu.iter().map(|m| m / gamma).collect();
                lambda.push(0.0);
                let mut tf = TradeoffFunction::affine(labels, lambda, c)?;
                if spec.family != Family::Custom {
                    // Built-in protocols emit the untested symbol on every
                    // untested round, so symbols with λ ≠ 0 occur with total
                    // probability at most γ under any attack.
                    let peak = mu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    tf.var_ub = tf.var_ub.min(peak * peak / gamma);
                    tf.min_sigma_lb = tf.min_sigma_lb.max(c + mu.iter().fold(0.0f64, |m, &v| m.min(v)));
                }
                Ok(tf)
            }
        }
    }

    /// Honest distribution in tradeoff-label order: tested symbols, then
    /// the untested one.
    fn ca_hon(&self, tf: &TradeoffFunction, gamma: f64) -> f64 {
        let mut probs: Vec<f64> = self.q_test.iter().map(|q| gamma * q).collect();
        probs.push(1.0 - gamma * self.q_test.iter().sum::<f64>());
        tf.evaluate(&probs)
    }
}

/// Asymptotic rate CA(ν_hon) − H(S|VI) with the slope maximising the bound at
/// the honest statistics.
pub fn asymptotic_rate(spec: &ProtocolSpec, p: f64, budget: &SolverBudget) -> Result<AsymptoticResult, KeyRateError> {
    let setup = Setup::new(spec, p)?;
    asymptotic_with(&setup, p, budget)
}

fn asymptotic_with(setup: &Setup, p: f64, budget: &SolverBudget) -> Result<AsymptoticResult, KeyRateError> {
    let gamma = match setup.model {
        Model::Reduced(_) => 0.0,
        Model::Full(_) => budget.asymptotic_gamma,
    };
    let search = LambdaSearch { max_evals: budget.dual_evals, ..Default::default() };
    let choice = setup
        .with_offsets(gamma, budget, |c_of| maximize_dual_with(c_of, &setup.q_test, &search))?
        .map_err(|source| KeyRateError::Solver { gamma, source })?;
    Ok(AsymptoticResult {
        p,
        rate: choice.value - setup.h_sv,
        ca_hon: choice.value,
        h_sv: setup.h_sv,
        slope: choice.lambda,
        offset: choice.c,
    })
}

/// Maximises `f` over α ∈ (ALPHA_MIN, ALPHA_MAX): a 200-point scan in
/// log(α − 1), then golden section around the best scan point.
fn best_alpha(f: impl Fn(f64) -> f64) -> (f64, f64) {
    const SCAN: usize = 200;
    let (lo, hi) = ((ALPHA_MIN - 1.0).ln(), (ALPHA_MAX - 1.0).ln());
    let t_at = |k: usize| lo + (hi - lo) * k as f64 / (SCAN - 1) as f64;
    let alpha = |t: f64| (1.0 + t.exp()).clamp(ALPHA_MIN, ALPHA_MAX);
    let mut best = (alpha(t_at(0)), f(alpha(t_at(0))));
    let mut best_k = 0;
    for k in 1..SCAN {
        let a = alpha(t_at(k));
        let v = f(a);
        if v > best.1 {
            best = (a, v);
            best_k = k;
        }
    }
    let (a, b) = (t_at(best_k.saturating_sub(1)), t_at((best_k + 1).min(SCAN - 1)));
    let (t, neg) = golden_section(|t| -f(alpha(t)), a, b, 1e-9);
    if -neg > best.1 {
        (alpha(t), -neg)
    } else {
        best
    }
}

struct Candidate {
    gamma: f64,
    tf: TradeoffFunction,
    ca_hon: f64,
    alpha: f64,
    rhs: f64,
}

/// Best real-valued key length for a fixed tradeoff function.
fn evaluate_tf(
    setup: &Setup,
    params: &SecurityParams,
    tf: TradeoffFunction,
    gamma: f64,
    lambda_ec_bits: u64,
) -> Result<Candidate, KeyRateError> {
    let ca_hon = setup.ca_hon(&tf, gamma);
    let (_, k_ca) = threshold_k_ca(ca_hon, &tf, params.n, params.eps_comp_ev, params.eps_kv)?;
    let (alpha, rhs) = best_alpha(|a| match geat_terms(a, setup.d_a, &tf, params.eps_s) {
        Ok(b) => key_length_rhs(params, k_ca, &b, lambda_ec_bits),
        Err(_) => f64::NEG_INFINITY,
    });
    Ok(Candidate { gamma, tf, ca_hon, alpha, rhs })
}

fn optimize_gamma(
    setup: &Setup,
    params: &SecurityParams,
    budget: &SolverBudget,
    gamma: f64,
    start: &[f64],
    lambda_ec_bits: u64,
) -> Result<Candidate, KeyRateError> {
    let solver_err = |source| KeyRateError::Solver { gamma, source };
    setup.with_offsets(gamma, budget, |c_of| -> Result<Candidate, KeyRateError> {
        let failure = RefCell::new(None);
        let candidate = |free: &[f64]| -> Result<Candidate, KeyRateError> {
            let mut mu = free.to_vec();
            mu.push(0.0);
            let c = c_of(&mu).map_err(solver_err)?;
            let tf = setup.tradeoff(&mu, c, gamma)?;
            evaluate_tf(setup, params, tf, gamma, lambda_ec_bits)
        };
        let objective = |free: &[f64]| {
            if free.iter().any(|x| x.abs() > 100.0) {
                return f64::INFINITY;
            }
            match candidate(free) {
                Ok(c) => -c.rhs,
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    f64::INFINITY
                }
            }
        };
        // the asymptotic slope is usually far too steep for finite n, so
        // shrunken copies of it compete as starting points
        let free0 = &start[..start.len() - 1];
        let mut x0 = free0.to_vec();
        let mut f0 = objective(&x0);
        for k in 1..8 {
            let t = 0.5f64.powi(k);
            let y: Vec<f64> = free0.iter().map(|m| m * t).collect();
            let fy = objective(&y);
            if fy < f0 {
                (x0, f0) = (y, fy);
            }
        }
        let step = 0.25 * x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let (x, _) = nelder_mead(objective, &x0, step, budget.finite_evals, 1e-12);
        if let Some(e) = failure.take() {
            return Err(e);
        }
        candidate(&x)
    })?
}

/// Longest key over the γ grid, the slope of the tradeoff function and α.
/// Ties keep the first γ in grid order.
pub fn optimize_keyrate(
    spec: &ProtocolSpec,
    p: f64,
    params: &SecurityParams,
    budget: &SolverBudget,
) -> Result<KeyRateResult, KeyRateError> {
    params.validate()?;
    let setup = Setup::new(spec, p)?;
    let asym = asymptotic_with(&setup, p, budget)?;
    let lambda_ec_bits = lambda_ec(params.n, setup.h_sv, setup.d_a, params.eps_comp_kv);
    let grid: Vec<f64> = match setup.model {
        Model::Full(_) if spec.family == Family::Custom => vec![spec.gamma],
        _ => budget.gamma_grid.clone(),
    };
    let candidates: Vec<Result<Candidate, KeyRateError>> = grid
        .par_iter()
        .map(|&gamma| {
            let start: Vec<f64> = match setup.model {
                Model::Reduced(_) => asym.slope.iter().map(|m| m * (1.0 - gamma)).collect(),
                Model::Full(_) => asym.slope.clone(),
            };
            optimize_gamma(&setup, params, budget, gamma, &start, lambda_ec_bits)
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for c in candidates {
        let c = c?;
        if best.as_ref().map_or(true, |b| c.rhs > b.rhs) {
            best = Some(c);
        }
    }
    let best = best.ok_or_else(|| KeyRateError::Params("empty γ grid".into()))?;
    let (delta, k_ca) = threshold_k_ca(best.ca_hon, &best.tf, params.n, params.eps_comp_ev, params.eps_kv)?;
    let breakdown = geat_terms(best.alpha, setup.d_a, &best.tf, params.eps_s)?;
    let l = key_length_blocked(params, k_ca, &breakdown, lambda_ec_bits).max(0);
    Ok(KeyRateResult {
        p,
        n: params.n,
        s: params.s,
        key_length: l,
        rate: l as f64 / params.n as f64,
        plan: CompletenessPlan { lambda_ec: lambda_ec_bits, k_ca, delta },
        breakdown,
        gamma: best.gamma,
        eps_cor: params.eps_cor(),
        eps_sec: params.eps_sec(),
        tradeoff: best.tf,
        ca_hon: best.ca_hon,
        h_sv: setup.h_sv,
    })
}
