//! Active-learning campaign engine for continuous crystallization: surrogate
//! spaces, GP surrogates, diagnostics, acquisition, the expert-gated campaign
//! loop and policy replication.

pub mod acquisition;
pub mod analysis;
pub mod bundled;
pub mod campaign;
pub mod dataset;
pub mod error;
pub mod replication;
pub mod sampling;
pub mod seeds;
pub mod surrogate;

pub use error::{Error, Result};
