//! Robust and consistent algorithmic recourse for generalized linear models
//! under bounded model shift, with a ROAR-style baseline, LIME-style local
//! surrogates for networks and a cross-validated experiment harness.
//!
//! Numerical types are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common `f64` and `f32` instantiations.

// `!(x > 0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod data;
pub mod error;
pub mod glm;
pub mod harness;
pub mod models;
pub mod roar;
pub mod scalar;
pub mod solver;
pub mod surrogate;
pub mod tradeoff;

pub use error::{RecourseError, Result};
pub use scalar::Scalar;

pub type ModelParamsF64 = glm::ModelParams<f64>;
pub type ModelParamsF32 = glm::ModelParams<f32>;
pub type RecourseQueryF64 = glm::RecourseQuery<f64>;
pub type RecourseQueryF32 = glm::RecourseQuery<f32>;
pub type NeighborhoodF64 = adversary::Neighborhood<f64>;
pub type NeighborhoodF32 = adversary::Neighborhood<f32>;
pub type RecoursePlanF64 = solver::RecoursePlan<f64>;
pub type RecoursePlanF32 = solver::RecoursePlan<f32>;
pub type DatasetF64 = data::Dataset<f64>;
pub type DatasetF32 = data::Dataset<f32>;
pub type TradeoffQueryF64 = tradeoff::TradeoffQuery<f64>;
pub type TradeoffQueryF32 = tradeoff::TradeoffQuery<f32>;
