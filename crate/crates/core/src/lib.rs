//! Simulator for deterministic entanglement distillation with
//! polarization–spatial hyperentanglement, as used to prepare clean Bell
//! pairs for double-server blind quantum computation.
//!
//! Layers, bottom up:
//!
//! * [`linalg`]: dense complex vectors and matrices up to dimension 144.
//! * [`states`]: Bell states, the hyperentangled source and its noisy
//!   ensemble.
//! * [`qnd`]: the cross-Kerr parity device as a branch table, its readout,
//!   and a full joint-space oracle.
//! * [`protocol`]: the four parties, the message bus, the protocol steps
//!   and the transcript audit.
//! * [`config`] and [`report`]: run configuration, seeded execution and
//!   report serialization for the command-line tool.

pub mod config;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod qnd;
pub mod report;
pub mod rng;
pub mod states;

pub use error::{Error, Result};
pub use linalg::{DensityMatrix, StateVector};
pub use rng::RngStream;
