//! Reconstruction of bandlimited, possibly multi-channel signals from
//! generalized samples `s_k = ⟨x, h_k⟩` by projections onto convex sets.

pub mod error;
pub mod harness;
pub mod multichannel;
pub mod ortho;
pub mod samplers;
pub mod signal;
pub mod serial;
pub mod sinc_table;

pub use error::{ReconError, Result};
