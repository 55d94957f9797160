//! Affine tradeoff functions and the test/data lifting.

use serde::{Deserialize, Serialize};

use crate::protocol::StatisticsVector;

use super::TradeoffError;

/// f(q) = Σ_c λ_c q_c + c_offset together with the bounds on its range and
/// variance that the second-order terms consume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TradeoffFunction {
    pub labels: Vec<String>,
    pub lambda: Vec<f64>,
    pub c_offset: f64,
    pub max_val: f64,
    pub min_val: f64,
    /// Lower bound on the minimum over achievable statistics.
    pub min_sigma_lb: f64,
    /// Upper bound on the variance under any achievable distribution.
    pub var_ub: f64,
}

impl TradeoffFunction {
    /// Plain affine function with the generic bounds: the minimum over all
    /// point masses for MinΣ and Popoviciu's (max − min)²/4 for the variance.
    pub fn affine(labels: Vec<String>, lambda: Vec<f64>, c_offset: f64) -> Result<Self, TradeoffError> {
        if labels.len() != lambda.len() || lambda.is_empty() {
            return Err(TradeoffError::LambdaLength { expected: labels.len(), found: lambda.len() });
        }
        if !c_offset.is_finite() || lambda.iter().any(|x| !x.is_finite()) {
            return Err(TradeoffError::NonFinite);
        }
        let max_val = lambda.iter().fold(f64::NEG_INFINITY, |m, &l| m.max(l)) + c_offset;
        let min_val = lambda.iter().fold(f64::INFINITY, |m, &l| m.min(l)) + c_offset;
        Ok(TradeoffFunction {
            labels,
            lambda,
            c_offset,
            max_val,
            min_val,
            min_sigma_lb: min_val,
            var_ub: (max_val - min_val).powi(2) / 4.0,
        })
    }

    /// Value on a point mass.
    pub fn at_symbol(&self, k: usize) -> f64 {
        self.lambda[k] + self.c_offset
    }

    /// Value on a probability vector indexed like `labels`.
    pub fn evaluate(&self, probs: &[f64]) -> f64 {
        self.lambda.iter().zip(probs).map(|(l, q)| l * q).sum::<f64>() + self.c_offset
    }

    /// Value on a statistics vector, matched by label.
    pub fn evaluate_stats(&self, stats: &StatisticsVector) -> Result<f64, TradeoffError> {
        let mut total = self.c_offset;
        for (label, l) in self.labels.iter().zip(&self.lambda) {
            let q = stats
                .get(label)
                .ok_or_else(|| TradeoffError::Inconsistent(format!("statistics lack symbol '{label}'")))?;
            total += l * q;
        }
        Ok(total)
    }

    /// Checks the ordering constraints between the cached bounds.
    pub fn check(&self) -> Result<(), TradeoffError> {
        let tol = 1e-9 * (1.0 + self.max_val.abs() + self.min_val.abs());
        let max = (0..self.lambda.len()).map(|k| self.at_symbol(k)).fold(f64::NEG_INFINITY, f64::max);
        let min = (0..self.lambda.len()).map(|k| self.at_symbol(k)).fold(f64::INFINITY, f64::min);
        if self.labels.len() != self.lambda.len() {
            return Err(TradeoffError::Inconsistent("labels and λ differ in length".into()));
        }
        if (max - self.max_val).abs() > tol || (min - self.min_val).abs() > tol {
            return Err(TradeoffError::Inconsistent("max_val/min_val do not match λ and c_offset".into()));
        }
        if self.min_sigma_lb < self.min_val - tol || self.min_sigma_lb > self.max_val + tol || self.var_ub < 0.0 {
            return Err(TradeoffError::Inconsistent("min_sigma_lb or var_ub out of range".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tradeoff functions always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, TradeoffError> {
        let f: TradeoffFunction = serde_json::from_str(text)?;
        f.check()?;
        Ok(f)
    }
}

/// Lifts a bound g for test rounds to all rounds, appending the untested
/// symbol "⊥": CA(δ_c) = Max g + (g(δ_c) − Max g)/γ and CA(δ_⊥) = Max g.
///
/// The variance bound follows from Var ≤ E[(f − Max g)²] and the fact that
/// f − Max g vanishes on untested rounds and is bounded by (Max g − Min g)/γ
/// in magnitude on the γ fraction of tested ones.
pub fn lift_test_data(g: &TradeoffFunction, gamma: f64) -> Result<TradeoffFunction, TradeoffError> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(TradeoffError::Gamma(gamma));
    }
    let max_g = (0..g.lambda.len()).map(|k| g.at_symbol(k)).fold(f64::NEG_INFINITY, f64::max);
    let min_g = (0..g.lambda.len()).map(|k| g.at_symbol(k)).fold(f64::INFINITY, f64::min);
    let mut labels = g.labels.clone();
    labels.push("⊥".into());
    let mut lambda: Vec<f64> = (0..g.lambda.len()).map(|k| (g.at_symbol(k) - max_g) / gamma).collect();
    lambda.push(0.0);
    Ok(TradeoffFunction {
        labels,
        lambda,
        c_offset: max_g,
        max_val: max_g,
        min_val: max_g + (min_g - max_g) / gamma,
        min_sigma_lb: min_g,
        var_ub: (max_g - min_g).powi(2) / gamma,
    })
}
