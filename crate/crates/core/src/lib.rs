//! Reconstruction of directed causal networks of coupled oscillators.
//!
//! The crate simulates mass-spring and Kuramoto oscillator networks under
//! impulse forcing and infers their wiring with three methods:
//!
//! - [`pci`]: perturbation cascade inference, a Bayesian edge update driven by
//!   the order in which nodes activate after a node is kicked;
//! - [`granger`]: pairwise-conditional Granger causality on (transient) windows;
//! - [`ccm`]: a convergent cross mapping baseline.
//!
//! [`harness`] runs parameter sweeps over these and scores them against the
//! generating network.
//!
//! Adjacency convention everywhere: `adj[target][source]`, i.e. an entry at
//! row `i`, column `j` means node `j` drives node `i`.

// `!(x > 0.0)` is used on purpose so that NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccm;
pub mod dynsim;
pub mod error;
pub mod granger;
pub mod harness;
pub mod network;
pub mod pci;

pub use error::{Error, Result};
pub use network::{DirectedNetwork, DistanceSets};
