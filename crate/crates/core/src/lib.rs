//! Physics-informed neural networks built from a parallel fusion of a
//! B-spline Kolmogorov–Arnold network and a multi-layer perceptron.

pub mod autodiff;
pub mod batch;
pub mod config;
mod error;
pub mod experiment;
pub mod hybrid;
pub mod kan;
pub mod mlp;
pub mod params;
pub mod pinn;
pub mod problems;
pub mod report;
pub mod sample;
pub mod train;

pub use error::ModelError;
pub use hybrid::{HpkmModel, Network};
pub use params::ParamStore;
