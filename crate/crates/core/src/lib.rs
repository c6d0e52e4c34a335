//! Device-independent randomness amplification at desk scale.
//!
//! The crate covers the full post-processing chain of a two-node Bell-type
//! randomness amplification experiment: weak-source models, an untrusted
//! device simulator, MDL/CHSH inequality estimation, the security calculus
//! that turns an observed violation into a certified output length, a
//! quasi-linear two-source extractor over GF(2), timing-budget arithmetic
//! for locality-loophole closure, and an end-to-end protocol pipeline.

pub mod bitstore;
pub mod device;
pub mod entropy;
pub mod error;
pub mod extractor;
pub mod inequality;
pub mod pipeline;
pub mod real;
pub mod source;
pub mod stats;
pub mod timing;

pub use error::{Error, Result};
pub use real::Real;

/// Default scalar for all floating-point calculus.
pub type Scalar = f64;

pub type QuantumDevice64 = device::QuantumDeviceModel<f64>;
pub type MdlParams64 = inequality::MdlParams<f64>;
pub type SecurityParams64 = entropy::SecurityParams<f64>;
pub type EtaStrategy64 = entropy::EtaStrategy<f64>;
pub type Distribution64 = stats::Distribution<f64>;
pub type SegmentTable64 = timing::SegmentTable<f64>;
