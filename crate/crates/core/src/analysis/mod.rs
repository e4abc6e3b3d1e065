//! Empirical verification harness: norm-preservation and concentration
//! measurements, exactness suites against dense oracles, and Monte Carlo
//! phase-transition sweeps.

pub mod accounting;
pub mod concentration;
pub mod equivalence;
pub mod phase;
pub mod rip;

pub use accounting::{compression_factor, size_accounting};
pub use concentration::{measure_rop_concentration, ConcentrationReport};
pub use equivalence::{run_adjoint_suite, verify_appendix_equivalences, Check, SuiteReport};
pub use phase::{phase_transition_sweep, Param, PhaseDiagram, SweepAxis, SweepSetup};
pub use rip::{measure_rip_l2l1, measure_rip_l2l2, RipReport};
