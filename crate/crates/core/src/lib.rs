//! Exhaustive feature-combination study for LoRaWAN spreading-factor (SF)
//! prediction.
//!
//! The five candidate radio features (RSSI, SNR, carrier frequency, end-device
//! antenna height, gateway distance) give 31 non-empty subsets. Each subset is
//! used to train four classifier families (k-NN, CART decision tree, random
//! forest, multinomial logistic regression), and the resulting 124 models are
//! scored by accuracy and support-weighted F1. A Pearson filter ranking of the
//! features against SF serves as an independent cross-check.
//!
//! Module map:
//!
//! - [`data`]: CSV ingestion, cleaning, projection, synthetic generator.
//! - [`features`]: the feature catalog and the 31-entry combination table.
//! - [`split`]: seeded train/test partitioning.
//! - [`models`]: the four classifiers and the L-BFGS solver behind softmax
//!   regression.
//! - [`metrics`]: accuracy, F1, confusion matrices, Pearson ranking.
//! - [`sweep`]: the 31 x 4 run orchestrator.
//! - [`report`]: tables, figure series and ranking files.

pub mod data;
pub mod error;
pub mod features;
pub mod metrics;
pub mod models;
pub mod report;
pub mod seed;
pub mod split;
pub mod sweep;

pub use data::{ColumnMapping, Dataset, Sf, SyntheticConfig};
pub use error::{Error, Result};
pub use features::{ComboCatalog, FeatureId, FeatureSet};
pub use metrics::{CorrelationReport, EvalResult};
pub use models::{Hyperparams, ModelKind, TrainedModel};
pub use split::SplitSpec;
pub use sweep::{SweepPlan, SweepReport};
