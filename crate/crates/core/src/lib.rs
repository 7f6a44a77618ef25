//! Precoded turbo equalization for power-line channels.
//!
//! The crate covers the whole simulation chain: multipath channel synthesis
//! and discretization ([`channel`]), Gaussian-mixture impulsive noise
//! ([`noise`]), trellises for the outer code, the rate-1 precoder and the ISI
//! channel ([`trellis`]), exact log-domain BCJR ([`siso`]), the iterative
//! receiver ([`turbo`]), EXIT-chart analysis ([`exit`]) and the experiment
//! harness behind the command-line tool ([`sim`]).

pub mod channel;
pub mod config;
pub mod error;
pub mod exit;
pub mod noise;
pub mod poly;
pub mod sim;
pub mod siso;
pub mod trellis;
pub mod turbo;

pub use error::{Error, Result};
