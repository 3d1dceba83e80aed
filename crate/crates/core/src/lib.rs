//! Dirichlet learning and Dirichlet active learning on similarity graphs.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the experiment driver and the
//! CLI use.

pub mod acquisition;
pub mod active;
pub mod dirichlet;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod propagation;
pub mod scalar;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Dataset = graph::Dataset<f64>;
pub type Graph = graph::SimilarityGraph<f64>;
pub type Laplacian = graph::LaplacianOperator<f64>;
pub type Spectral = graph::SpectralCache<f64>;
pub type Column = propagation::PropagationColumn<f64>;
pub type Cache = propagation::PropagationCache<f64>;
pub type Field = dirichlet::DirichletField<f64>;
pub type Covariance = acquisition::GaussianFieldCovariance<f64>;
pub type Scores = acquisition::AcquisitionScores<f64>;
