//! Imaging operator algebra.
//!
//! The noiseless measurement model is `z = M D G F x`:
//! `F` the unitary 2-D DFT ([`dft`]), `G` the non-uniform sampling of the
//! spectrum at the baselines of every batch ([`visibility`], backed by
//! [`nufft`]), `D` the per-batch rank-one projections and `M` the +/-1
//! modulation across batches ([`rop`]). [`forward`] assembles the complete
//! maps together with the dense oracles used to cross-check them.

pub mod dft;
pub mod forward;
pub mod nufft;
pub mod plan;
pub mod postsensing;
pub mod rop;
pub mod sketch;
pub mod visibility;

pub use visibility::{Backend, VisibilityOp};
