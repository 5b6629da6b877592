//! Resilience of a RIS-assisted cell-free MIMO downlink when recovery from a
//! link blockage has to run with finite-blocklength (FBL) coding.
//!
//! The crate is organised bottom-up:
//!
//! * [`fbl`] holds the rate mathematics (inverse Q, dispersion, IBL/FBL rates).
//! * [`model`] generates topologies and channels and evaluates SINRs.
//! * [`metrics`] scores absorption, adaptation and time-to-recovery.
//! * [`conic`] is the solver-agnostic convex program representation and the
//!   solve contract, with backends selected by name.
//! * [`sca`] builds the convexified beamforming / phase-shift subproblems and
//!   runs the alternating optimization.
//! * [`scenario`] orchestrates a full disruption episode and parameter sweeps.
//!
//! Interchangeable pieces (conic backends, recovery policies, ignore-branch
//! handling) live behind traits and are looked up by name through
//! [`registry::Registry`].

pub mod conic;
pub mod fbl;
pub mod metrics;
pub mod model;
pub mod registry;
pub mod sca;
pub mod scenario;

pub use num_complex::Complex64;
