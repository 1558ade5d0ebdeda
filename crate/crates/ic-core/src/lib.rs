//! Interactive coding over noisy bit channels.
//!
//! The crate simulates a challenge-response scheme that runs an
//! insertion-deletion resilient protocol over erasure channels with rare
//! flips, an iterative doubling scheme for channels with adversarial erasures,
//! and a compiler from UPEF to unknown-flip channels based on AMD codes. The
//! trace tools decompose recorded executions and rebuild matching
//! insertion-deletion executions.

pub mod amd_uf;
pub mod channels;
pub mod proto_core;
pub mod scalar;
pub mod scheme_cr;
pub mod scheme_iter;
pub mod trace_lab;
pub mod util;

pub use num_rational::{BigRational, Rational64};
pub use scalar::Scalar;

/// Flip schedule evaluated in `f64`.
pub type Schedule = channels::UpefSchedule<f64>;
/// Flip schedule evaluated exactly.
pub type ExactSchedule = channels::UpefSchedule<BigRational>;
/// mUPEF parameters evaluated in `f64`.
pub type Mupef = channels::MupefParams<f64>;
/// UF compiler over an `f64` schedule.
pub type UfCompiler = amd_uf::UfCompiled<f64>;
/// Iterative-scheme thresholds, compared exactly.
pub type IterParams = scheme_iter::IterationParams<Rational64>;
