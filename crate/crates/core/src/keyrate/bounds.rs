//! Second-order terms and the key-length inequality.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::tradeoff::TradeoffFunction;

use super::params::SecurityParams;
use super::KeyRateError;

/// g(ε) = −log₂(1 − √(1 − ε²)), evaluated as log₂((1 + √(1 − ε²))/ε²) so
/// that tiny ε does not cancel to zero.
pub fn g_eps(eps: f64) -> f64 {
    ((1.0 + (1.0 - eps * eps).sqrt()) / (eps * eps)).log2()
}

/// Constants of the entropy-accumulation bound at one Rényi order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeatBreakdown {
    pub alpha: f64,
    pub g_eps: f64,
    pub v_term: f64,
    pub kprime: f64,
    pub d_a: usize,
}

pub fn geat_terms(alpha: f64, d_a: usize, tf: &TradeoffFunction, eps: f64) -> Result<GeatBreakdown, KeyRateError> {
    if !(alpha > 1.0 && alpha < 1.5) {
        return Err(KeyRateError::Alpha(alpha));
    }
    let v_term = (2.0 * (d_a * d_a) as f64 + 1.0).log2() + (2.0 + tf.var_ub).sqrt();
    let spread = 2.0 * (d_a as f64).log2() + tf.max_val - tf.min_sigma_lb;
    let kprime = (2.0 - alpha).powi(3) / (6.0 * (3.0 - 2.0 * alpha).powi(3) * LN_2)
        * ((alpha - 1.0) / (2.0 - alpha) * spread).exp2()
        * (spread.exp2() + E * E).ln().powi(3);
    Ok(GeatBreakdown { alpha, g_eps: g_eps(eps), v_term, kprime, d_a })
}

/// Real-valued right-hand side of the key-length inequality for step size
/// `params.s`, with ε′ = ε_s/(3s − 2) in the smoothing terms.
pub fn key_length_rhs(params: &SecurityParams, k_ca: f64, breakdown: &GeatBreakdown, lambda_ec: u64) -> f64 {
    let s = params.s as f64;
    let g = if params.s == 1 { breakdown.g_eps } else { g_eps(params.eps_s / (3.0 * s - 2.0)) };
    rhs(params, k_ca, breakdown, g, s, lambda_ec)
}

fn rhs(params: &SecurityParams, k_ca: f64, b: &GeatBreakdown, g: f64, s: f64, lambda_ec: u64) -> f64 {
    let n = params.n as f64;
    let a = b.alpha;
    let r = (a - 1.0) / (2.0 - a);
    n * k_ca
        - n * r * LN_2 / 2.0 * b.v_term * b.v_term
        - s * (g + a * (1.0 / params.eps_a).log2()) / (a - 1.0)
        - n * r * r * b.kprime
        - (s - 1.0) * g
        - (2.0 * (1.0 / params.eps_pa).log2()).ceil()
        - (1.0 / params.eps_kv).log2().ceil()
        - lambda_ec as f64
}

fn floor_length(x: f64) -> i64 {
    // saturating: hopeless parameter sets report a hugely negative length
    x.floor() as i64
}

/// Largest integer l allowed under strict sequentiality. The step size in
/// `params` is ignored. Non-positive values mean no key.
pub fn key_length(params: &SecurityParams, k_ca: f64, breakdown: &GeatBreakdown, lambda_ec: u64) -> i64 {
    floor_length(rhs(params, k_ca, breakdown, breakdown.g_eps, 1.0, lambda_ec))
}

/// Largest integer l when Eve may correlate `params.s` consecutive rounds.
/// At s = 1 this is [`key_length`].
pub fn key_length_blocked(params: &SecurityParams, k_ca: f64, breakdown: &GeatBreakdown, lambda_ec: u64) -> i64 {
    floor_length(key_length_rhs(params, k_ca, breakdown, lambda_ec))
}
