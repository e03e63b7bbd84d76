//! Consensus-based optimization with average drift (Ad-CBO).
//!
//! The crate is organized around a discrete interacting-particle update:
//! each particle drifts toward a softmin-weighted consensus point, the
//! whole swarm is optionally shifted by an average-drift term, and a
//! common Gaussian noise draw scales the spread. On top of that core sit
//!
//! * [`objective`] — the Rastrigin benchmark and the rolling negative
//!   Sharpe ratio used by the portfolio loop,
//! * [`adam`] — the Adam-moment variant of the particle update,
//! * [`theory`] — closed-form stability quantities (folded-normal
//!   contraction factor, the `g` root `y*`, the log-Lyapunov rate and
//!   its root `sigma*`, initialization constants),
//! * [`simplex`] — exact Euclidean projection onto the probability
//!   simplex,
//! * [`portfolio`] — price ingestion/synthesis, rolling statistics, the
//!   projected trading loop, hindsight benchmark and regret analysis,
//! * [`harness`] — seeded batch experiments and plot-data emission.

pub mod adam;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod objective;
pub mod params;
pub mod portfolio;
pub mod rng;
pub mod simplex;
pub mod theory;

pub use ensemble::{ConsensusResult, Ensemble, NoiseDraw};
pub use error::Error;
pub use params::{Beta, CboParams, NoiseMode};
pub use rng::RngHandle;
