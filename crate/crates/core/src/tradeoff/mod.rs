//! Certified affine lower bounds on the single-round conditional entropy
//! (min-tradeoff functions).

mod function;
mod lambda;
mod linear;
mod objective;
pub mod optim;
mod polish;
mod solver;

use thiserror::Error;

use crate::protocol::ProtocolError;

pub use function::{lift_test_data, TradeoffFunction};
pub use lambda::{heuristic_lambda, maximize_dual, maximize_dual_with, LambdaChoice, LambdaSearch};
pub use linear::{lin_lower_bound, LinearBound, MarginalConstraint};
pub use objective::{b92_reduced_objective, objective, ObjectiveKind, Problem};
pub use polish::IsometryChart;
pub use solver::{
    certified_c_lambda, frank_wolfe, perturbation_penalty, SolveReport, Solver, DEFAULT_MAX_ITER, EPS_PERT,
};

#[derive(Debug, Error)]
pub enum TradeoffError {
    #[error("λ has {found} entries, expected {expected}")]
    LambdaLength { expected: usize, found: usize },
    #[error("λ has non-finite entries")]
    NonFinite,
    #[error("protocol does not admit the reduced data-round objective")]
    NoReduction,
    #[error("testing probability {0} outside (0, 1]")]
    Gamma(f64),
    #[error("tradeoff function document is inconsistent: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<crate::qcore::QError> for TradeoffError {
    fn from(e: crate::qcore::QError) -> Self {
        TradeoffError::Protocol(ProtocolError::Linalg(e))
    }
}
