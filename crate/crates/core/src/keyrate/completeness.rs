//! Completeness: how much error-correction leakage and how low a threshold
//! the honest implementation needs to pass with high probability.

use serde::{Deserialize, Serialize};

use crate::tradeoff::TradeoffFunction;

use super::KeyRateError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletenessPlan {
    pub lambda_ec: u64,
    pub k_ca: f64,
    pub delta: f64,
}

/// Bits leaked during error correction:
/// ⌈n·h + 2√n·√(1 − 2log₂(ε/2))·log₂(1 + 2|S|) + 2log₂(2/ε)⌉.
pub fn lambda_ec(n: u64, h_sv: f64, s_alphabet_size: usize, eps_comp_kv: f64) -> u64 {
    let n = n as f64;
    let x = n * h_sv
        + 2.0
            * n.sqrt()
            * (1.0 - 2.0 * (eps_comp_kv / 2.0).log2()).sqrt()
            * (1.0 + 2.0 * s_alphabet_size as f64).log2()
        + 2.0 * (2.0 / eps_comp_kv).log2();
    x.ceil().max(0.0) as u64
}

/// Margin δ below the honest value so that Bernstein's inequality keeps the
/// honest abort probability under ε^comp_EV − ε_KV. Returns (δ, k_CA).
pub fn threshold_k_ca(
    ca_hon: f64,
    tf: &TradeoffFunction,
    n: u64,
    eps_comp_ev: f64,
    eps_kv: f64,
) -> Result<(f64, f64), KeyRateError> {
    if eps_comp_ev <= eps_kv {
        return Err(KeyRateError::Threshold { ev: eps_comp_ev, kv: eps_kv });
    }
    let inner = (2.0 * (tf.max_val - tf.min_val) * ca_hon + 6.0 * tf.var_ub) / (3.0 * n as f64)
        * (1.0 / (eps_comp_ev - eps_kv)).log2();
    let delta = inner.max(0.0).sqrt();
    Ok((delta, ca_hon - delta))
}

/// Bernstein bound exp(−n(δ²/2)/(Var + (Max − Min)δ/3)) on the probability
/// that the empirical tradeoff value falls δ below its mean.
pub fn bernstein_abort(delta: f64, n: u64, tf: &TradeoffFunction) -> f64 {
    if delta <= 0.0 {
        return 1.0;
    }
    let denom = tf.var_ub + (tf.max_val - tf.min_val) * delta / 3.0;
    if denom <= 0.0 {
        return 0.0;
    }
    (-(n as f64) * (delta * delta / 2.0) / denom).exp()
}
