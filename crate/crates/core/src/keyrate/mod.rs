//! Finite-size key lengths: the second-order entropy-accumulation terms,
//! completeness-driven choices of λ_EC and k_CA, and the search over the
//! testing probability γ and the Rényi order α.

mod bounds;
mod completeness;
mod optimize;
mod params;
mod report;

use thiserror::Error;

use crate::protocol::ProtocolError;
use crate::tradeoff::TradeoffError;

pub use bounds::{g_eps, geat_terms, key_length, key_length_blocked, key_length_rhs, GeatBreakdown};
pub use completeness::{bernstein_abort, lambda_ec, threshold_k_ca, CompletenessPlan};
pub use optimize::{
    asymptotic_rate, default_gamma_grid, optimize_keyrate, spec_at_gamma, AsymptoticResult, KeyRateResult,
    SolverBudget, ALPHA_MAX, ALPHA_MIN,
};
pub use params::SecurityParams;
pub use report::{format_sig, read_keyrate_csv, write_keyrate_csv, KeyRateRow, KEYRATE_HEADER};

#[derive(Debug, Error)]
pub enum KeyRateError {
    #[error("Rényi order α = {0} outside (1, 3/2)")]
    Alpha(f64),
    #[error("invalid security parameters: {0}")]
    Params(String),
    #[error("threshold undefined: ε^comp_EV = {ev} must exceed ε_KV = {kv}")]
    Threshold { ev: f64, kv: f64 },
    #[error("tradeoff solve failed at γ = {gamma}: {source}")]
    Solver {
        gamma: f64,
        #[source]
        source: TradeoffError,
    },
    #[error("cannot re-derive a custom spec at γ = {0}; only its own γ is available")]
    GammaUnavailable(f64),
    #[error("protocol has no untested symbol to separate test rounds")]
    NoTestSplit,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Tradeoff(#[from] TradeoffError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
