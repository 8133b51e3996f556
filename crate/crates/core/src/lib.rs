//! Frequency oracles under flexible local differential privacy.
//!
//! The centre of the crate is the Flexible Hadamard Response (FHR): every
//! user encodes their item as a non-trivial row of a Sylvester Hadamard
//! matrix, samples one `+1` and one `-1` column of that row, and flips the
//! pair with probability `1/(e^ε+1)`. Reports cost `2r+1` bits and the
//! aggregator recovers unbiased counts with one dot product per item.
//!
//! Alongside FHR the crate ships the usual baselines (GRR, RAPPOR/OUE unary
//! encoding and OLH), an exact enumerator that audits the `(ε, η)` overlap
//! guarantee of any small mechanism, the four utility metrics used to compare
//! them, a Zipf/CSV workload layer, a bit-packed wire format and a
//! deterministic experiment harness.
//!
//! Monte-Carlo work fans out over users through [`exec::Execution`]; with the
//! `parallel` feature (on by default) that runs on rayon, otherwise everything
//! runs sequentially with identical results.

pub mod aggregator;
pub mod data;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod hadamard;
pub mod mechanisms;
pub mod metrics;
pub mod params;
pub mod simulation;
pub mod verifier;
pub mod wire;

pub use error::{Error, Result};
pub use exec::Execution;
pub use hadamard::HadamardOrder;
pub use mechanisms::{FhrReport, Mechanism};
pub use params::PrivacyParams;
