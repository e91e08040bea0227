//! Numerical checks of when composition with a warp keeps a function
//! bandlimited: phase linearity along lines, exponential-type growth,
//! kernel invariance for non-injective maps, and out-of-band spreading.

pub mod growth;
pub mod kernel;
pub mod phase;
pub mod spread;

pub use growth::{circle, exp_type_bound_check, GrowthReport, GrowthRow};
pub use kernel::{kernel_invariance_check, KernelReport};
pub use phase::{
    affinity_verdict, seeded_probes, warp_phase_profile, LineProbe, PhaseProfile, ProbeResidual, ProbeSpec, Verdict,
    VerdictStatus, VerdictTolerances,
};
pub use spread::{nonaffine_spread, warped_oob, SpreadRow, SpreadTable, WarpFamily};
