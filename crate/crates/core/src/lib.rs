//! Motion feasibility for multi-agent systems on matrix Lie groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`lie`] — SO(3), SE(2), SE(3) and their finite products: hat/vee, exponential,
//!   pairings, `Ad`/`ad` and their duals.
//! * [`constraints`] — holonomic inter-agent distance constraints, their ambient
//!   gradients and left-trivialized gradient rows.
//! * [`kinematic`] — admissible-velocity subspaces for kinematic left-invariant
//!   systems and the group abstraction integrator built on them.
//! * [`dynamics`] — constrained Euler-Lagrange right-hand side, multiplier
//!   resolution by index reduction, regularity certificate.
//! * [`integrators`] — explicit Euler and Lie-Euler time stepping with drift diagnostics.
//! * [`auv`] — the three-vehicle underwater scenario and control-law extraction.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases at
//! the crate root fix the scalar to `f64`, which is what the CLI uses.

pub mod auv;
pub mod constraints;
pub mod dynamics;
mod error;
pub mod integrators;
pub mod kinematic;
pub mod lie;
pub mod linalg;
mod scalar;

pub use error::{GeoError, Result};
pub use scalar::Scalar;

pub use constraints::{ConstraintEvaluation, ConstraintGraph, ConstraintKind, EdgeConstraint};
pub use dynamics::{LagrangianModel, MultiplierSolve, RegularityReport};
pub use integrators::{IntegratorConfig, Method, SystemState, Trajectory};
pub use kinematic::FeasibilitySystem;
pub use lie::{AlgebraElement, CoAlgebraElement, GroupElement, GroupKind, ProductAlgebraElement, ProductElement};

pub type GroupElement64 = GroupElement<f64>;
pub type AlgebraElement64 = AlgebraElement<f64>;
pub type CoAlgebraElement64 = CoAlgebraElement<f64>;
pub type ProductElement64 = ProductElement<f64>;
pub type ProductAlgebraElement64 = ProductAlgebraElement<f64>;
pub type ConstraintGraph64 = ConstraintGraph<f64>;
pub type LagrangianModel64 = LagrangianModel<f64>;
pub type SystemState64 = SystemState<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type AuvParams64 = auv::AuvParams<f64>;

pub type GroupElement32 = GroupElement<f32>;
pub type AlgebraElement32 = AlgebraElement<f32>;
