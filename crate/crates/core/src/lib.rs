//! Energy-efficient resource allocation for IRS-aided NOMA beamforming.
//!
//! The crate is organised bottom-up: [`channel`] synthesises the geometric
//! Rician channels and evaluates SINR, rate and power; [`clustering`] and
//! [`beamforming`] fix the user clusters and zero-forcing beams; [`opac`]
//! solves the power allocation (stage 1); [`orca`] optimises the reflection
//! vector (stage 2) on top of the small barrier SDP solver in [`conic`];
//! [`harness`] runs paired Monte Carlo trials and writes CSV results.

pub mod beamforming;
pub mod channel;
pub mod clustering;
pub mod config;
pub mod conic;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod opac;
pub mod orca;

pub use config::SystemConfig;
pub use error::{Error, Result};
