//! Experiment harness: datasets, run configuration, training, metrics, and
//! the estimator variance bench.

pub mod bench;
pub mod config;
pub mod data;
pub mod metrics;
pub mod train;

pub use bench::{variance_bench, BenchReport, BenchRow, BenchSpec};
pub use config::{DatasetSpec, EstimatorId, ObjectiveId, RunConfig, Task};
pub use data::{load_idx_dataset, make_synthetic, DataExample, Dataset, SplitSizes};
pub use metrics::{metric_accuracy, metric_psnr};
pub use train::{train, EpochMetrics, RunRecord, TestMetrics, TrainOutcome};
