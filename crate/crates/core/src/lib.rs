//! Learning an attributed spatial And-Or grammar of indoor scenes and
//! synthesizing furniture layouts with annealed Metropolis-Hastings.

pub mod affordance;
pub mod cli;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod grammar;
pub mod io;
pub mod learning;
pub mod metrics;
pub mod model;
pub mod planner;
pub mod prob;
pub mod raster;
pub mod sampler;
pub mod scene;

pub use error::{Error, Result};
