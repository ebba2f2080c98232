//! Matroid basis finding over an independence oracle, with a simulated
//! parallel round model.
//!
//! The library has three layers:
//!
//! * [`oracle`] — concrete matroid families, views under deletion and
//!   contraction, and circuit primitives.
//! * [`scheduler`] — the adaptive-round model: every oracle access flows
//!   through batched rounds, and a [`scheduler::RoundLedger`] records the
//!   round/query accounting for a run.
//! * algorithms — [`estimators`], [`decomposition`], [`progress`],
//!   [`basis`], and [`applications`] implement sampling statistics,
//!   decomposition-based peeling, single-round progress subroutines, the
//!   end-to-end basis finders, and random feasible sequences.
//!
//! [`mod@bench`] drives experiment grids and serializes results; the
//! `matroid-bench` binary exposes it on the command line.

pub mod applications;
pub mod basis;
pub mod bench;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod estimators;
pub mod oracle;
pub mod progress;
pub mod scheduler;

/// Index of an element in a matroid's ground set; dense in `[0, n)`.
pub type ElementId = u32;

pub use config::AlgorithmConfig;
pub use error::{Error, Result};
pub use oracle::{Circuit, MatroidInstance, MatroidSpec, MatroidView};
pub use scheduler::RoundLedger;
