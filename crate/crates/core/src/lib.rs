//! Bags of projected nearest neighbours.
//!
//! A bagged ensemble of k-nearest-neighbour classifiers in which every base
//! model first projects its bootstrap sample onto a discriminant subspace
//! built from same-class and other-class neighbour scatter matrices, restricted
//! to a random subset of the covariates. Includes the bagged k-NN baselines,
//! out-of-bag tuning, variable importance, a projection for visualisation and
//! the accuracy statistics used to compare classifiers.

pub mod dataio;
pub mod error;
pub mod evalstats;
pub mod matrixcore;
pub mod model;
pub mod neighbors;
pub mod rng;
pub mod subspace;
pub mod synth;

pub use dataio::{load_model, load_table, save_model, LabeledDataset};
pub use error::{BopnnError, Result};
pub use model::{fit_ensemble, Ensemble, HyperParams};
pub use neighbors::ClassDistribution;
