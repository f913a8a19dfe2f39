//! The four classifier families behind one train/predict interface.

pub mod knn;
pub mod lbfgs;
pub mod mlr;
pub mod scale;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sf};
use crate::error::{Error, Result};
use crate::metrics;
use crate::seed;
use crate::split::{self, SplitSpec};

use self::knn::Knn;
use self::mlr::{MlrOptions, SoftmaxRegression};
use self::scale::Standardizer;
use self::tree::{Forest, ForestParams, GrowParams, Tree, TrainingMatrix};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Knn,
    Dtc,
    Mlr,
    Rf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Knn, ModelKind::Dtc, ModelKind::Mlr, ModelKind::Rf];

    /// Stable numeric code, used as a seed-stream key.
    pub fn code(self) -> u64 {
        self as u64
    }

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Dtc => "dtc",
            ModelKind::Mlr => "mlr",
            ModelKind::Rf => "rf",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Knn => "k-NN",
            ModelKind::Dtc => "DTC",
            ModelKind::Mlr => "MLR",
            ModelKind::Rf => "RF",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "knn" | "k-nn" => Ok(ModelKind::Knn),
            "dtc" | "tree" => Ok(ModelKind::Dtc),
            "mlr" | "logreg" => Ok(ModelKind::Mlr),
            "rf" | "forest" => Ok(ModelKind::Rf),
            other => Err(Error::InvalidConfig(format!("unknown model kind `{other}`"))),
        }
    }
}

/// Inclusive range of neighbour counts scanned during k selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KRange {
    pub min: usize,
    pub max: usize,
}

impl KRange {
    pub fn values(&self) -> Vec<usize> {
        (self.min..=self.max).collect()
    }
}

/// Where the best k is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KSelection {
    /// On the evaluation (test) set, as in the reference procedure.
    EvalSet,
    /// On a held-out slice of the training set; `fraction` stays in training.
    Validation { fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub knn_k_range: KRange,
    pub knn_selection: KSelection,
    /// Subsample the k-NN training set to at most this many rows.
    pub knn_max_train: Option<usize>,
    pub knn_seed: u64,
    pub dtc_seed: u64,
    pub mlr_max_iter: usize,
    pub mlr_l2_strength: f64,
    pub mlr_tol: f64,
    pub rf_n_estimators: usize,
    pub rf_bootstrap: bool,
    pub rf_seed: u64,
    /// Features drawn per split; `None` means `ceil(sqrt(p))`.
    pub rf_features_per_split: Option<usize>,
    /// z-score features (fit on training rows) for k-NN and MLR.
    pub standardize: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            knn_k_range: KRange { min: 1, max: 20 },
            knn_selection: KSelection::EvalSet,
            knn_max_train: None,
            knn_seed: 42,
            dtc_seed: 42,
            mlr_max_iter: 1000,
            mlr_l2_strength: 1.0,
            mlr_tol: 1e-4,
            rf_n_estimators: 100,
            rf_bootstrap: true,
            rf_seed: 42,
            rf_features_per_split: None,
            standardize: false,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.knn_k_range.min == 0 || self.knn_k_range.min > self.knn_k_range.max {
            return bad(format!("invalid k range {:?}", self.knn_k_range));
        }
        if self.rf_n_estimators == 0 {
            return bad("rf_n_estimators must be >= 1".into());
        }
        if self.mlr_max_iter == 0 {
            return bad("mlr_max_iter must be >= 1".into());
        }
        if !(self.mlr_l2_strength >= 0.0) || !self.mlr_l2_strength.is_finite() {
            return bad("mlr_l2_strength must be finite and >= 0".into());
        }
        if !(self.mlr_tol >= 0.0) {
            return bad("mlr_tol must be >= 0".into());
        }
        if self.rf_features_per_split == Some(0) {
            return bad("rf_features_per_split must be >= 1".into());
        }
        if let KSelection::Validation { fraction } = self.knn_selection {
            SplitSpec { train_fraction: fraction, ..Default::default() }.validate()?;
        }
        Ok(())
    }

    pub fn features_per_split(&self, p: usize) -> usize {
        self.rf_features_per_split
            .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
            .clamp(1, p.max(1))
    }
}

/// Training diagnostics kept alongside the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_k: Option<usize>,
    /// Weighted F1 for each scanned k.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub k_curve: Vec<(usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlr: Option<mlr::FitInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Knn(Knn),
    Tree(Tree),
    Forest(Forest),
    Mlr(SoftmaxRegression),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub n_features: usize,
    /// Ascending SF values seen in training; payload class indices refer here.
    pub classes: Vec<Sf>,
    pub hyperparams: Hyperparams,
    pub scaler: Option<Standardizer>,
    pub payload: Payload,
    pub info: TrainInfo,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    model: TrainedModel,
}

/// Ascending class list and per-row class indices.
fn encode_labels(labels: &[Sf]) -> (Vec<Sf>, Vec<usize>) {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, y)
}

fn check_training(train: &Dataset) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyTraining);
    }
    if !train.is_finite() {
        return Err(Error::NonFinite("training features".into()));
    }
    let first = train.labels()[0];
    if train.labels().iter().all(|&l| l == first) {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Train a model of `kind`. `eval_for_k` is the set on which k-NN selects k
/// when [`KSelection::EvalSet`] is active and the k range is not a single
/// value.
pub fn train(
    kind: ModelKind,
    train: &Dataset,
    hp: &Hyperparams,
    eval_for_k: Option<&Dataset>,
) -> Result<TrainedModel> {
    hp.validate()?;
    check_training(train)?;
    match kind {
        ModelKind::Knn => knn_train(train, hp, eval_for_k),
        ModelKind::Dtc => dtc_train(train, hp),
        ModelKind::Mlr => mlr_train(train, hp),
        ModelKind::Rf => rf_train(train, hp),
    }
}

/// Outcome of a k scan.
#[derive(Debug, Clone, PartialEq)]
pub struct KChoice {
    pub k: usize,
    pub curve: Vec<(usize, f64)>,
}

fn knn_fit(train: &Dataset, k: usize, standardize: bool) -> (Knn, Vec<Sf>, Option<Standardizer>) {
    let (classes, y) = encode_labels(train.labels());
    let p = train.n_cols();
    let scaler = standardize.then(|| Standardizer::fit(train.values(), p));
    let x = match &scaler {
        Some(s) => s.transform(train.values()),
        None => train.values().to_vec(),
    };
    let model = Knn {
        n_features: p,
        n_classes: classes.len(),
        k,
        x,
        y,
    };
    (model, classes, scaler)
}

/// Scan `k_range` on `eval` and return the k with the highest weighted F1
/// (ties toward smaller k), along with the whole curve.
pub fn knn_select_best_k(
    train: &Dataset,
    eval: &Dataset,
    k_range: KRange,
    standardize: bool,
) -> Result<KChoice> {
    if eval.is_empty() {
        return Err(Error::EmptyInput);
    }
    if eval.n_cols() != train.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: train.n_cols(),
            got: eval.n_cols(),
        });
    }
    if k_range.min == 0 || k_range.min > k_range.max || k_range.max > train.n_rows() {
        return Err(Error::KRange(format!(
            "{}..={} with {} training rows",
            k_range.min,
            k_range.max,
            train.n_rows()
        )));
    }
    let (model, classes, scaler) = knn_fit(train, 1, standardize);
    let queries = match &scaler {
        Some(s) => s.transform(eval.values()),
        None => eval.values().to_vec(),
    };
    let ks = k_range.values();
    let preds = model.predict_for_ks(&queries, &ks);
    let mut curve = Vec::with_capacity(ks.len());
    for (&k, pred) in ks.iter().zip(&preds) {
        let labels: Vec<Sf> = pred.iter().map(|&c| classes[c]).collect();
        let f1 = metrics::f1_weighted(eval.labels(), &labels)?.weighted;
        curve.push((k, f1));
    }
    let mut best = curve[0];
    for &(k, f1) in &curve[1..] {
        if f1 > best.1 {
            best = (k, f1);
        }
    }
    Ok(KChoice { k: best.0, curve })
}

fn knn_train(train: &Dataset, hp: &Hyperparams, eval_for_k: Option<&Dataset>) -> Result<TrainedModel> {
    let sub;
    let train = match hp.knn_max_train {
        Some(cap) if cap < train.n_rows() => {
            let mut rng = seed::rng(hp.knn_seed, &[0x7375_6273]);
            let mut idx = index::sample(&mut rng, train.n_rows(), cap).into_vec();
            idx.sort_unstable();
            sub = train.subset(&idx);
            &sub
        }
        _ => train,
    };
    check_training(train)?;

    let range = hp.knn_k_range;
    let mut info = TrainInfo::default();
    let k = if range.min == range.max {
        if range.max > train.n_rows() {
            return Err(Error::KRange(format!("k={} with {} training rows", range.max, train.n_rows())));
        }
        range.min
    } else {
        let choice = match hp.knn_selection {
            KSelection::EvalSet => {
                let eval = eval_for_k.ok_or_else(|| {
                    Error::InvalidConfig("k-NN k selection on the evaluation set needs an evaluation set".into())
                })?;
                knn_select_best_k(train, eval, range, hp.standardize)?
            }
            KSelection::Validation { fraction } => {
                let spec = SplitSpec {
                    train_fraction: fraction,
                    seed: seed::derive(hp.knn_seed, &[0x7661_6c]),
                    stratified: false,
                };
                let (fit, val) = split::train_test_split(train, &spec)?;
                check_training(&fit)?;
                knn_select_best_k(&fit, &val, range, hp.standardize)?
            }
        };
        info.k_curve = choice.curve;
        choice.k
    };
    info.chosen_k = Some(k);
    let (model, classes, scaler) = knn_fit(train, k, hp.standardize);
    Ok(TrainedModel {
        kind: ModelKind::Knn,
        n_features: train.n_cols(),
        classes,
        hyperparams: hp.clone(),
        scaler,
        payload: Payload::Knn(model),
        info,
    })
}

/// Unrestricted CART: every split considers all features.
pub fn dtc_train(train: &Dataset, hp: &Hyperparams) -> Result<TrainedModel> {
    check_training(train)?;
    let (classes, y) = encode_labels(train.labels());
    let p = train.n_cols();
    let m = TrainingMatrix::new(train.values(), p, &y, classes.len());
    let tree = tree::grow_tree(
        &m,
        &vec![1; y.len()],
        GrowParams {
            max_features: p,
            seed: hp.dtc_seed,
            tree_index: 0,
        },
    );
    Ok(TrainedModel {
        kind: ModelKind::Dtc,
        n_features: p,
        classes,
        hyperparams: hp.clone(),
        scaler: None,
        payload: Payload::Tree(tree),
        info: TrainInfo::default(),
    })
}

pub fn rf_train(train: &Dataset, hp: &Hyperparams) -> Result<TrainedModel> {
    check_training(train)?;
    let (classes, y) = encode_labels(train.labels());
    let p = train.n_cols();
    let m = TrainingMatrix::new(train.values(), p, &y, classes.len());
    let forest = tree::grow_forest(
        &m,
        ForestParams {
            n_estimators: hp.rf_n_estimators,
            bootstrap: hp.rf_bootstrap,
            max_features: hp.features_per_split(p),
            seed: hp.rf_seed,
        },
    );
    Ok(TrainedModel {
        kind: ModelKind::Rf,
        n_features: p,
        classes,
        hyperparams: hp.clone(),
        scaler: None,
        payload: Payload::Forest(forest),
        info: TrainInfo::default(),
    })
}

pub fn mlr_train(train: &Dataset, hp: &Hyperparams) -> Result<TrainedModel> {
    check_training(train)?;
    let (classes, y) = encode_labels(train.labels());
    let p = train.n_cols();
    let scaler = hp.standardize.then(|| Standardizer::fit(train.values(), p));
    let x = match &scaler {
        Some(s) => s.transform(train.values()),
        None => train.values().to_vec(),
    };
    let (model, fit) = mlr::fit(
        &x,
        &y,
        p,
        classes.len(),
        &MlrOptions {
            l2: hp.mlr_l2_strength,
            max_iter: hp.mlr_max_iter,
            tol: hp.mlr_tol,
        },
    )?;
    if !fit.converged {
        log::debug!(
            "softmax regression stopped with {:?} after {} iterations (|g|inf = {:.3e})",
            fit.status,
            fit.iterations,
            fit.grad_norm
        );
    }
    Ok(TrainedModel {
        kind: ModelKind::Mlr,
        n_features: p,
        classes,
        hyperparams: hp.clone(),
        scaler,
        payload: Payload::Mlr(model),
        info: TrainInfo {
            mlr: Some(fit),
            ..Default::default()
        },
    })
}

impl TrainedModel {
    /// Predict one row without a dimension check.
    fn predict_unchecked(&self, x: &[f64], buf: &mut Vec<f64>) -> Sf {
        let x = match &self.scaler {
            Some(s) => {
                buf.resize(x.len(), 0.0);
                s.transform_row(x, buf);
                &buf[..]
            }
            None => x,
        };
        let idx = match &self.payload {
            Payload::Knn(m) => m.predict_index(x),
            Payload::Tree(t) => t.predict_index(x),
            Payload::Forest(f) => f.predict_index(x),
            Payload::Mlr(m) => m.predict_index(x),
        };
        self.classes[idx]
    }

    pub fn predict_one(&self, x: &[f64]) -> Result<Sf> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(self.predict_unchecked(x, &mut Vec::new()))
    }

    /// Predict every row of a row-major matrix with `n_cols` columns.
    pub fn predict_rows(&self, values: &[f64], n_cols: usize) -> Result<Vec<Sf>> {
        if n_cols != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: n_cols,
            });
        }
        use rayon::prelude::*;
        Ok(values
            .par_chunks(n_cols.max(1))
            .map_init(Vec::new, |buf, row| self.predict_unchecked(row, buf))
            .collect())
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<Sf>> {
        self.predict_rows(ds.values(), ds.n_cols())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&ModelDocument {
            format: "sfselect-model".into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(s)?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported model format version {}",
                doc.version
            )));
        }
        Ok(doc.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(v: u8) -> Sf {
        Sf::new(v).unwrap()
    }

    fn ds_1d(x: &[f64], y: &[u8]) -> Dataset {
        Dataset::from_flat(vec!["x".into()], x.to_vec(), y.iter().map(|&v| sf(v)).collect()).unwrap()
    }

    #[test]
    fn single_class_rejected() {
        let d = ds_1d(&[1.0, 2.0], &[7, 7]);
        for kind in ModelKind::ALL {
            assert!(matches!(train(kind, &d, &Hyperparams::default(), Some(&d)), Err(Error::SingleClass)));
        }
    }

    #[test]
    fn nan_rejected() {
        let d = ds_1d(&[1.0, f64::NAN], &[7, 8]);
        assert!(matches!(dtc_train(&d, &Hyperparams::default()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn knn_needs_eval_set_for_scan() {
        let d = ds_1d(&[0.0, 1.0, 2.0, 3.0], &[7, 7, 8, 8]);
        let hp = Hyperparams { knn_k_range: KRange { min: 1, max: 3 }, ..Default::default() };
        assert!(train(ModelKind::Knn, &d, &hp, None).is_err());
        let hp1 = Hyperparams { knn_k_range: KRange { min: 1, max: 1 }, ..Default::default() };
        let m = train(ModelKind::Knn, &d, &hp1, None).unwrap();
        assert_eq!(m.predict(&d).unwrap(), d.labels());
    }

    #[test]
    fn k_range_beyond_training_rows() {
        let d = ds_1d(&[0.0, 1.0, 2.0], &[7, 7, 8]);
        let err = knn_select_best_k(&d, &d, KRange { min: 1, max: 20 }, false).unwrap_err();
        assert!(matches!(err, Error::KRange(_)));
    }

    #[test]
    fn self_evaluation_picks_k1() {
        let d = ds_1d(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], &[7, 12, 7, 12, 7, 12]);
        let c = knn_select_best_k(&d, &d, KRange { min: 1, max: 5 }, false).unwrap();
        assert_eq!(c.k, 1);
        assert_eq!(c.curve[0].1, 1.0);
        assert_eq!(c.curve.len(), 5);
    }

    #[test]
    fn validation_mode_selects_without_eval_set() {
        let x: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let y: Vec<u8> = (0..60).map(|i| if i < 30 { 7 } else { 9 }).collect();
        let d = ds_1d(&x, &y);
        let hp = Hyperparams {
            knn_k_range: KRange { min: 1, max: 5 },
            knn_selection: KSelection::Validation { fraction: 0.75 },
            ..Default::default()
        };
        let m = train(ModelKind::Knn, &d, &hp, None).unwrap();
        assert!(m.info.chosen_k.is_some());
        assert_eq!(m.info.k_curve.len(), 5);
    }

    #[test]
    fn unseen_class_cannot_be_predicted() {
        let d = ds_1d(&[0.0, 1.0], &[7, 8]);
        let m = dtc_train(&d, &Hyperparams::default()).unwrap();
        assert_eq!(m.classes, vec![sf(7), sf(8)]);
        let p = m.predict(&ds_1d(&[5.0], &[12])).unwrap();
        assert_ne!(p[0], sf(12));
    }

    #[test]
    fn zero_softmax_predicts_lowest_sf() {
        let m = TrainedModel {
            kind: ModelKind::Mlr,
            n_features: 2,
            classes: vec![sf(8), sf(10), sf(11)],
            hyperparams: Hyperparams::default(),
            scaler: None,
            payload: Payload::Mlr(SoftmaxRegression::zeros(2, 3)),
            info: TrainInfo::default(),
        };
        let p = m.predict_rows(&[1.0, 2.0, -3.0, 4.0, 0.0, 0.0], 2).unwrap();
        assert_eq!(p, vec![sf(8); 3]);
        assert!(m.predict_rows(&[], 2).unwrap().is_empty());
        assert!(matches!(m.predict_rows(&[1.0, 2.0, 3.0], 3), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn features_per_split_default() {
        let hp = Hyperparams::default();
        assert_eq!([1, 2, 3, 4, 5].map(|p| hp.features_per_split(p)), [1, 2, 2, 2, 3]);
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("RF".parse::<ModelKind>().unwrap(), ModelKind::Rf);
        assert_eq!("k-NN".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
