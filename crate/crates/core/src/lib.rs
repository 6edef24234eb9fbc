//! Ecological-diffusion forecasting of invasive spread and optimal survey
//! design.

pub mod config;
pub mod design;
pub mod error;
pub mod forecast;
pub mod grid;
pub mod io;
pub mod mcmc;
pub mod model;
pub mod pipeline;
pub mod propagator;
pub mod rng;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
