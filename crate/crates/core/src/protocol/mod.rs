//! Protocol descriptions: Alice's ensemble, Bob's measurement and the
//! classical announcement (PD), raw-key (RK) and evaluation (EV) maps, plus
//! the operators they induce on the source-replaced state.

mod honest;
mod json;
mod operators;
mod presets;
mod spec;

use thiserror::Error;

use crate::qcore::QError;

pub use honest::{channel_table, honest_model};
pub use json::SpecDocument;
pub use operators::{
    source_replacement, BlockGroup, ConstraintOperators, DataReduction, MeasurementOp, Nu1Block, StatisticsVector,
};
pub use presets::{b92_preset, bb84_preset};
pub use spec::{
    Diagnostic, Family, PovmElement, ProtocolSpec, SourceState, DIMENSIONS, GAMMA_RANGE, POVM_COMPLETENESS,
    POVM_POSITIVITY, SOURCE_NORMALIZATION, STATE_NORMALIZATION, TABLE_TOTALITY,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("invalid protocol: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("testing probability {0} outside (0, 1]")]
    GammaOutOfRange(f64),
    #[error("noise parameter {0} outside [0, 1]")]
    NoiseOutOfRange(f64),
    #[error("operator dimension {0} exceeds the supported size")]
    TooLarge(usize),
    #[error("state has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("state has a singular marginal on P")]
    SingularMarginal,
    #[error("unknown label '{label}' in {table}")]
    UnknownLabel { table: &'static str, label: String },
    #[error("malformed spec document: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Linalg(#[from] QError),
}
