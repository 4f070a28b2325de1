//! Classical simulation of quantum-assisted simulation for time-dependent
//! Hamiltonians: operator-set closure, K-moment bases, one-shot overlap
//! evaluation and classical coefficient evolution.

pub mod ansatz;
pub mod baselines;
pub mod config;
pub mod error;
pub mod evolution;
pub mod hamiltonian;
pub mod lindblad;
pub mod linalg;
pub mod overlap;
pub mod output;
pub mod pauli;
pub mod runner;
pub mod state;

pub use error::{Error, Result};
pub use pauli::{PauliKey, PauliString, PauliSum, C64};
