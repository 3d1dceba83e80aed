//! Datasets, similarity graphs, combinatorial Laplacians and their smallest
//! eigenpairs.

mod dataset;
mod eigen;
mod io;
mod knn;
mod laplacian;
mod synth;

pub use dataset::Dataset;
pub use eigen::{smallest_eigenpairs, EigenMethod, EigenOptions, SpectralCache};
pub use io::{load_dataset, DatasetFormat, LabelColumn, LoadOptions};
pub use knn::{build_knn_graph, cosine_weight, rbf_weight, Metric};
pub use laplacian::{ConnectivityReport, LaplacianOperator, SimilarityGraph};
pub use synth::{generate_mixture, grid_blobs, two_moons, MixtureComponent};
