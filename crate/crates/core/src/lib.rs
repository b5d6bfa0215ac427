//! Finite abstraction of structured stochastic systems as dynamic Bayesian
//! networks, with sum-product verification of finite-horizon probabilistic
//! invariance and dimension-dependent error certificates.
//!
//! The pipeline is:
//!
//! 1. describe the continuous process ([`model::ProcessModel`]) and the safe
//!    box ([`model::SafeSet`]);
//! 2. derive Lipschitz data and size per-dimension grids from an error
//!    budget ([`bounds`], [`partition::size_from_budget`]);
//! 3. build the per-dimension conditional probability tables
//!    ([`abstraction::build_dbn`]);
//! 4. order the Bellman summand's factor graph and compile an elimination
//!    plan ([`factor_graph`]);
//! 5. run value iteration through the plan ([`checker`]).

pub mod abstraction;
pub mod bounds;
pub mod checker;
pub mod dump;
pub mod error;
pub mod factor_graph;
pub mod gaussian;
pub mod integrate;
pub mod model;
pub mod model_file;
pub mod partition;
pub mod report;

pub use error::{Error, Result};
