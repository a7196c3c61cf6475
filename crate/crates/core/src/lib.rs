//! Kolmogorov-Arnold networks for tabular fraud detection: B-spline edges,
//! training, hyperparameter search, a PCA-based suitability check, data
//! preparation and evaluation.

pub mod cli;
pub mod data;
pub mod decision;
pub mod error;
pub mod kan;
pub mod metrics;
pub mod optim;
pub mod pca;
pub mod plot;
pub mod seed;
pub mod spline;
pub mod tuner;

pub use data::{Dataset, PipelineConfig, RawDataset, SplitDataset};
pub use decision::{assess_separability, quick_decision, SeparabilityReport};
pub use error::{Error, Result};
pub use kan::{KanConfig, KanModel};
pub use metrics::{compute_metrics, MetricsReport};
pub use pca::{pca_fit, pca_transform, PcaModel};
pub use spline::{KnotVector, SplineFunction};
pub use tuner::{ga_search, grid_search, heuristic_config, Genome, SearchSpace, TrialRecord};
