//! Data ingestion, experiment configuration, training orchestration and
//! metrics persistence — everything around the machines themselves.

mod config;
mod data;
mod experiments;
mod metrics;
mod runner;

pub use config::{ExperimentConfig, ExperimentName};
pub use data::{
    load_idx_images, load_idx_labels, load_idx_pair, load_mnist_dir, synthetic_blobs, Dataset,
};
pub use experiments::build_experiment;
pub use metrics::{emit_metrics, read_metrics_json, MetricsFormat};
pub use runner::{run_experiment, DiagnosticsRecord, EpochMetrics, MetricsRecord};
