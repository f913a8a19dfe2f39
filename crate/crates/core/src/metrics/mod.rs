//! Classification scores and Pearson feature ranking.
//!
//! All scores live in `[0, 1]`; the report layer converts to percentages.

mod classification;
mod correlation;

use serde::{Deserialize, Serialize};

pub use classification::{accuracy, f1_weighted, ClassScore, ConfusionMatrix, F1Report};
pub use correlation::{pearson, rank_features, CorrelationReport, FeatureCorrelation, Pearson};

use crate::data::Sf;
use crate::error::Result;
use crate::models::ModelKind;

/// Scores of one (feature combination, model kind) run on the test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub serial: u8,
    pub kind: ModelKind,
    /// k chosen by the k-NN scan.
    pub k: Option<usize>,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScore>,
    pub confusion: ConfusionMatrix,
    /// Softmax regression only: whether the gradient tolerance was reached.
    pub converged: Option<bool>,
    pub partition_hash: String,
    /// Wall-clock train plus evaluation time; excluded from canonical output.
    pub seconds: f64,
}

impl EvalResult {
    pub fn score(serial: u8, kind: ModelKind, y_true: &[Sf], y_pred: &[Sf]) -> Result<Self> {
        let f1 = f1_weighted(y_true, y_pred)?;
        Ok(EvalResult {
            serial,
            kind,
            k: None,
            accuracy: accuracy(y_true, y_pred)?,
            weighted_f1: f1.weighted,
            macro_f1: f1.macro_avg,
            per_class: f1.per_class,
            confusion: ConfusionMatrix::from_labels(y_true, y_pred)?,
            converged: None,
            partition_hash: String::new(),
            seconds: 0.0,
        })
    }
}
