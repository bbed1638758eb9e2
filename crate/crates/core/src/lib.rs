//! Simulator for strongest-user collision resolution in Massive MIMO random
//! access.
//!
//! Contending UEs that picked the same pilot each receive a precoded downlink
//! pilot, estimate the total gain of everyone on that pilot, and keep
//! transmitting only if they believe they are the strongest.

pub mod channel;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod mathfn;
pub mod protocol;
pub mod resolution;
pub mod rng;

pub use error::{Result, SucrError};
