//! Mixed Poisson processes: constructions, exact finite-dimensional laws, and
//! Monte Carlo checks that the constructions agree.
//!
//! Numeric types are generic over [`Real`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the scalar.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod error;
pub mod kernels;
pub mod laws;
pub mod mixing;
pub mod num;
pub mod path;
pub mod quadrature;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod special;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use kernels::{DominatingFunction, InterarrivalKernel, KernelFamily};
pub use laws::{FddEvaluator, FddSource};
pub use mixing::{check_assumption, p_h_numeric, pushforward, AssumptionReport, MixingLaw, PushforwardLaw, RateLaw, Support, Transform};
pub use num::Real;
pub use path::{CountingPath, FddQuery};
pub use quadrature::{Integral, QuadratureSettings};
pub use rng::Stream;
pub use scenario::Scenario;
pub use sim::{simulate, Route, SimulatedPath, SimulationPlan};
pub use verify::{verify, VerificationReport};

pub type MixingLaw64 = MixingLaw<f64>;
pub type MixingLaw32 = MixingLaw<f32>;
pub type Kernel64 = InterarrivalKernel<f64>;
pub type Kernel32 = InterarrivalKernel<f32>;
pub type FddEvaluator64 = FddEvaluator<f64>;
pub type FddEvaluator32 = FddEvaluator<f32>;
pub type CountingPath64 = CountingPath<f64>;
pub type CountingPath32 = CountingPath<f32>;
pub type FddQuery64 = FddQuery<f64>;
pub type FddQuery32 = FddQuery<f32>;
pub type SimulationPlan64 = SimulationPlan<f64>;
pub type SimulationPlan32 = SimulationPlan<f32>;
