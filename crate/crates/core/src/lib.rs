//! Uplink unknown-interference modeling and outage-constrained rate
//! adaptation for cell-free massive MIMO.
//!
//! `no_std` with `alloc`; all randomness flows through explicit
//! [`rng::substream`] generators.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod error;
pub mod igsum;
pub mod linalg;
pub mod rateadapt;
pub mod receiver;
pub mod rng;
pub mod scenario;
pub mod sim;

pub use error::{Error, Result};
