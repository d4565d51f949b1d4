//! Expected-return symmetry discovery and other-play training for tabular
//! Dec-POMDPs.
//!
//! Everything numeric is generic over [`Scalar`], so the same code runs on
//! `f64`, `f32` or exact rationals. The aliases below fix the common choices.

pub mod aoh;
pub mod discovery;
pub mod envs;
pub mod error;
pub mod eval;
pub mod harness;
pub mod model;
pub mod policy;
pub mod scalar;
pub mod sim;
pub mod symmetry;
pub mod training;

pub use aoh::{JointAoh, LocalAoh};
pub use error::{Error, Result};
pub use model::{validate_model, AgentSpec, TabularDecPomdp, ValidationReport};
pub use policy::{epsilon_soften, PolicySource, TabularJointPolicy};
pub use scalar::Scalar;

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

pub type DecPomdp = TabularDecPomdp<f64>;
pub type DecPomdpF32 = TabularDecPomdp<f32>;
pub type ExactDecPomdp = TabularDecPomdp<Rational>;
pub type Policy = TabularJointPolicy<f64>;
pub type ExactPolicy = TabularJointPolicy<Rational>;
