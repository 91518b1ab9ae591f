//! Finite partial-monitoring games and the Neighborhood Watch learner.
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: loss and feedback matrices, signal matrices, observation sampling.
//! - [`geometry`]: best-response cells, neighbor detection, the neighborhood graph.
//! - [`observability`]: local observability check and observer vectors.
//! - [`learner`]: the per-action local learner (loss-difference estimates,
//!   exponential weights, exploration mixing).
//! - [`engine`]: the meta algorithm (stationary distribution, two-level sampling).
//! - [`adversary`]: opponents used to drive simulations.
//! - [`regret`]: exact external / internal / local internal regret.
//! - [`harness`]: game catalog, experiment configuration, sweeps and persistence.

pub mod adversary;
pub mod engine;
pub mod error;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod lp;
pub mod observability;
pub mod regret;

pub use error::{Error, Result};
pub use game::Game;
