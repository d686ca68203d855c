//! Solvers for coupled systems of first-order, history-dependent evolution
//! inclusions
//!
//! ```text
//! w' + A(t, θ, w) + (R₁w) + ∂J(t, θ, Sw, w) + ∂_c φ(t, θ, Rw, w) ∋ h₁
//! θ' + B(t, w, R₂w, θ) + ∂g(t, w, θ)                           ∋ h₂
//! ```
//!
//! on finite-dimensional (Galerkin) stand-ins for evolution triples. The
//! coupled system is solved by freezing the coupling data, solving two single
//! inclusions by implicit Euler with a forward–backward inner solver, and
//! iterating the resulting map to its fixed point.
//!
//! Two instantiations ship with the crate: a differential
//! variational-hemivariational inequality ([`dvhi`]) and a 2D
//! thermoviscoelastic frictional contact problem ([`contact`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod contact;
pub mod dvhi;
pub mod error;
pub mod estimates;
pub mod linalg;
pub mod operators;
pub mod probes;
pub mod runner;
pub mod spaces;
pub mod stepper;
pub mod system;

pub use error::{Error, Result};
pub use spaces::{DiscreteSpace, SpaceLabel, TimeGrid, Trajectory};

/// Coefficient vector.
pub type Vector = nalgebra::DVector<f64>;
/// Dense coefficient matrix.
pub type Matrix = nalgebra::DMatrix<f64>;
