//! Shared fixtures for the criterion benchmarks in `benches/`.

use pmqkd::protocol::{b92_preset, honest_model, source_replacement, ConstraintOperators};

/// Constraint operators of the B92 preset at γ = 0.5.
pub fn b92_operators() -> ConstraintOperators {
    source_replacement(&b92_preset(0.5).expect("valid preset")).expect("B92 operators")
}

/// A slope vector with the magnitudes seen in real tradeoff functions.
pub fn b92_lambda() -> Vec<f64> {
    vec![-19.5, 2.9, 12.4, 0.0]
}

/// Honest B92 statistics at depolarizing strength `p`.
pub fn b92_statistics(p: f64) -> Vec<f64> {
    honest_model(&b92_preset(0.5).expect("valid preset"), p).expect("honest model").0.probs
}
