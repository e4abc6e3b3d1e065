//! Compressive radio-interferometric imaging.
//!
//! Antenna signals are compressed at acquisition by random beamforming: each
//! batch covariance is observed only through `P` rank-one projections (ROPs)
//! `alpha^* C beta`, and the per-batch ROP vectors are aggregated over time by
//! `M` random +/-1 modulations. This crate provides:
//!
//! - [`geometry`]: antenna layouts and Earth-rotation synthesis of baselines,
//! - [`sky`]: sparse sky images, DC component and SNR,
//! - [`acquisition`]: time-domain simulation of antenna signals and the
//!   classical / compressive acquisition operators,
//! - [`operators`]: the imaging operator algebra (DFT, NUDFT/NUFFT, ROP,
//!   modulation, centering, post-sensing baselines) with exact adjoints,
//! - [`solver`]: l2-fidelity basis pursuit denoising by FISTA with continuation,
//! - [`analysis`]: empirical RIP/concentration measurements, equivalence
//!   suites and Monte Carlo phase-transition sweeps.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod analysis;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linop;
pub mod operators;
pub mod rng;
pub mod sky;
pub mod solver;

pub use num_complex::Complex64 as C64;

pub use error::{Error, Result};
pub use geometry::{ArrayLayout, BatchGeometry};
pub use linop::LinearOp;
pub use operators::plan::VisibilityPlan;
pub use operators::sketch::{SketchDistribution, SketchEnsemble};
pub use sky::SkyImage;
pub use solver::{SolverConfig, SolverResult};
