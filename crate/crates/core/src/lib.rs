//! Multi-agent peer-to-peer energy trading with uncertainty-aware forecasts.
//!
//! The numeric core (`linalg`, `autodiff`, `ktu`, `market`, `rewards`,
//! `agents`) is generic over [`Scalar`] (`f32` or `f64`). The simulation
//! layer (`profiles`, `env`) works in `f64`; the aliases below fix the scalar
//! for it.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod autodiff;
pub mod env;
pub mod ktu;
pub mod linalg;
pub mod market;
pub mod optim;
pub mod profiles;
pub mod rewards;
mod scalar;

pub use scalar::{sigmoid, softplus, Scalar};

// f64 instantiations used by the simulation layer and the CLI.
pub type Matrix64 = linalg::Matrix<f64>;
pub type KtuModel64 = ktu::KtuModel<f64>;
pub type ForecastDistribution64 = ktu::ForecastDistribution<f64>;
pub type Order64 = market::Order<f64>;
pub type Clearing64 = market::Clearing<f64>;
pub type PriceSignal64 = market::PriceSignal<f64>;
pub type Observation64 = rewards::AgentObservation<f64>;
pub type QNetwork64 = agents::QNetwork<f64>;
pub type DqnAgent64 = agents::DqnAgent<f64>;
