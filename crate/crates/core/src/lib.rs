//! Capacity planning for a network of hospitals.
//!
//! The crate is organised as a pipeline:
//!
//! * [`patient`] ingests admission episodes and derives modelling features,
//! * [`cart`] fits binary regression/classification trees on those features,
//! * [`demand`] turns historical records or tree leaves into daily bed-demand
//!   matrices with scenario probabilities,
//! * [`milp`] is an exact mixed-integer solver (two-phase simplex plus
//!   branch-and-bound),
//! * [`capacity`] builds the deterministic and two-stage stochastic planning
//!   models and extracts bed/staff plans,
//! * [`evaluate`] computes the EV / RP / EEV quartet and the value of the
//!   stochastic solution.
//!
//! All numeric kernels are generic over [`scalar::Scalar`]; the type aliases
//! at the crate root pin everything to `f64` for ordinary use.

pub mod capacity;
pub mod cart;
pub mod demand;
pub mod evaluate;
pub mod milp;
pub mod patient;
pub mod scalar;
pub mod svg;
pub mod synthetic;

pub use scalar::Scalar;

/// Default scalar for the whole pipeline.
pub type DefaultScalar = f64;

pub type LinearProgram = milp::LinearProgram<DefaultScalar>;
pub type SolveResult = milp::SolveResult<DefaultScalar>;
pub type DecisionTree = cart::DecisionTree<DefaultScalar>;
pub type DemandMatrix = demand::DemandMatrix<DefaultScalar>;
pub type RegionDemand = demand::RegionDemand<DefaultScalar>;
