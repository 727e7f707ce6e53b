//! Block orthogonal matching pursuit (BOMP) for block-sparse support recovery.
//!
//! The crate bundles the solver with the tools needed to check when it
//! provably works and when it provably fails:
//!
//! * [`block`]: block layouts, block-sparse signals, mixed norms, blocked matrices
//! * [`solver`]: the BOMP iteration and its stopping rules
//! * [`rip`]: exact block-RIP constants by support enumeration
//! * [`bounds`]: closed-form sufficient and necessary block-norm thresholds
//! * [`adversarial`]: the explicit instance on which the first selection fails
//! * [`proofs`]: numerical verification of the supporting identities
//! * [`experiment`]: seeded Monte Carlo recovery experiments
//! * [`io`]: CSV matrices and the JSON layout sidecar
//!
//! Block indices are 1-based throughout.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversarial;
pub mod block;
pub mod bounds;
pub mod error;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod proofs;
pub mod random;
pub mod rip;
pub mod solver;

pub use block::{
    BlockLayout, BlockSignal, BlockedMatrix, MixedNorm, SensingProblem, DEFAULT_ZERO_TOL,
};
pub use error::{BompError, Result};
pub use rip::RipReport;
pub use solver::{run_bomp, RecoveryTrace, StopMode, StoppingRule, TraceStatus};
