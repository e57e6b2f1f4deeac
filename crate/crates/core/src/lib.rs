//! Fixed-budget best-arm identification with two arms in the diffusion regime.
//!
//! The crate is organised around the pieces of the two-player game between a
//! statistician and nature:
//!
//! - [`normal`]: the standard normal distribution and the scalar problem
//!   `max δ Φ(-δ)` that pins every equilibrium constant.
//! - [`policy`]: sampling rules and implementation (terminal decision) rules.
//! - [`diffusion`]: continuous-time experiment simulator, likelihood-ratio and
//!   belief processes.
//! - [`regret`]: closed-form and Monte Carlo regret.
//! - [`game`]: best responses, divergence probes and equilibrium recovery.
//! - [`finite_sample`]: discrete n-period experiments under local alternatives,
//!   including the two-stage unknown-variance procedure.
//!
//! All Monte Carlo routines derive one generator per replication from a
//! master seed (see [`seed`]) so results do not depend on thread count.

pub mod diffusion;
pub mod error;
pub mod finite_sample;
pub mod game;
pub mod normal;
mod optimize;
pub mod policy;
pub mod regret;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
