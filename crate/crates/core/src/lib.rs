//! One-dimensional real-time tunneling toolkit.
//!
//! Classical motion in allowed (`h`) and forbidden (`H`) regions, WKB
//! profiles and actions, exact stationary scattering, and discretized
//! momentum operators in the wave and corpuscular representations.

// `!(a < b)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod format;
pub mod operators;
pub mod potential;
pub mod quadrature;
pub mod wkb;

pub use dynamics::{
    half_period, integrate_trajectory, integrate_trajectory_with, roundtrip_consistency, HalfPeriod,
    IntegrateOptions, ParticleState, RegionKind, StopReason, Trajectory,
};
pub use error::{Result, TunnelError};
pub use exact::{bound_profile, exact_transmission, numerov_transmission, DensityProfile, Method, ScatteringResult};
pub use operators::{mass_transform, momentum_apply, DefectReport, GridFunction, MomentumRep, RepresentationParams};
pub use potential::{find_turning_points, Domain, Family, Potential, PotentialSpec, RootKind, TurningPoints};
pub use wkb::{barrier_action, wkb_profile, wkb_transmission, ActionResult, Branch, WkbProfile};
