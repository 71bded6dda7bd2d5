//! Secure rate-splitting multiple access through a simultaneously
//! transmitting and reflecting RIS, under max-min fairness.
//!
//! A multi-antenna transmitter serves users on both sides of a STAR-RIS
//! operating in energy-splitting mode. Each user's message is split into a
//! common and a private stream; the common stream doubles as artificial
//! noise against external eavesdroppers, while per-stream SINR caps keep
//! private messages undecodable by other users (internal eavesdroppers) and
//! by external ones on either side.
//!
//! The optimizer maximizes the minimum user rate by alternating two convex
//! subproblems obtained through semidefinite relaxation: phase-shift
//! optimization with a penalized rank-one surrogate, and beamforming with
//! first-order surrogates inside a fractional-programming outer loop.
//! Rank-one precoders are recovered by Gaussian randomization.
//!
//! Modules follow the pipeline: [`channel`] synthesizes scenarios,
//! [`model`] evaluates ground-truth rates and residuals, [`conic`] lowers
//! Hermitian SDPs onto an interior-point backend, [`subproblems`] builds the
//! two convexified programs, [`optimizer`] runs the alternation,
//! [`baselines`] provides the comparison schemes and [`experiments`] the
//! sweep harness and CLI.

pub mod channel;
pub mod conic;
pub mod error;
pub mod hermitian;
pub mod model;
pub mod subproblems;

pub use error::{Error, Result};
