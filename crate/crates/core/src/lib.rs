//! Finite-size key rates for prepare-and-measure quantum key distribution.
//!
//! The crate is organised as a pipeline:
//!
//! - [`qcore`]: Hermitian linear algebra, entropies, partial traces, pinching.
//! - [`protocol`]: protocol descriptions, source replacement and the
//!   measurement operators that feed the convex program.
//! - [`tradeoff`]: certified affine entropy bounds (min-tradeoff functions)
//!   from Frank–Wolfe minimisation with dual certificates.
//! - [`keyrate`]: second-order key-length formulas, completeness parameters
//!   and the search over the testing probability and Rényi order.
//! - [`decoy`]: analytic photon-number bounds for decoy-state BB84.
//! - [`simrun`]: Monte-Carlo protocol runs with Toeplitz hashing and
//!   extraction.

pub mod decoy;
pub mod keyrate;
pub mod protocol;
pub mod qcore;
pub mod simrun;
pub mod tradeoff;

pub use protocol::{ConstraintOperators, ProtocolSpec, StatisticsVector};
pub use qcore::{CMatrix, HermitianMatrix, QError, SystemLayout};
