//! Trajectory planning for a fixed-wing UAV carrying a free-space optical
//! (FSO) backhaul link.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches the
//! filesystem, a concrete convex solver, or the command line lives in the
//! companion `fsotraj` crate.
//!
//! Layout:
//!
//! * [`channel`]: atmospheric attenuation, the FSO rate bound and the
//!   service radius that meets a rate threshold.
//! * [`dynamics`]: discrete kinematics, limit checks and the fixed-wing
//!   energy model.
//! * [`scp`]: the conic program model, the convexified subproblems and the
//!   successive convex approximation loop. Solving is delegated to any
//!   [`scp::ConicSolver`].
//! * [`planner`]: entry/exit energy minimization, the feasibility check,
//!   flight-time maximization, the rotation scheme, energy-efficiency and
//!   operation-time planning, and complexity estimates.
//! * [`baselines`]: straight and circular reference paths and the comparison
//!   metrics.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![warn(missing_debug_implementations)]

extern crate alloc;

pub mod baselines;
pub mod channel;
pub mod dynamics;
mod math;
pub mod planner;
pub mod scp;
mod vec2;

pub use vec2::{Rotation, Vec2};
