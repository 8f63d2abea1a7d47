//! Numerical laboratory for semicocycles over one-parameter semigroups.
//!
//! A semigroup `{F_t}` acts on a domain of a (truncated) Banach space and a
//! semicocycle `{Γ_t}` over it takes values in the matrix algebra `L(ℂ^m)`
//! and obeys the chain rule `Γ_t(F_s(x)) Γ_s(x) = Γ_{t+s}(x)`. This crate
//! generates such families by integrating `dΓ/dt = B(F_t(x)) Γ`, recovers
//! generators from given families, and measures the identities, growth
//! bounds and continuity phenomena the theory predicts.
//!
//! Module map:
//!
//! * [`algebra`]: complex matrices with induced norms, logarithmic norms,
//!   the matrix exponential and the Lyapunov index.
//! * [`flow`]: semigroup evaluation, Cauchy-problem integration and
//!   sampling of sets lying strictly inside a domain.
//! * [`cocycle`]: cocycle generation and every algebraic identity as a
//!   residual.
//! * [`models`]: the registry of explicit flows and cocycles.
//! * [`analysis`]: growth, Grönwall, Lyapunov, continuity and
//!   differentiability probes.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod analysis;
pub mod cocycle;
mod error;
pub mod flow;
pub mod models;
pub mod ode;
mod options;

pub use algebra::{AlgebraElement, NormTag, Scalar};
pub use cocycle::{CocycleModel, CocyclePath};
pub use error::{Error, Result};
pub use flow::{DomainDescriptor, DomainKind, FlowModel, SampleSet, Trajectory, VectorState};
pub use models::{build_default, build_model, ModelBundle, ModelName, ModelParams, Truth};
pub use options::SolverOptions;
