//! The combination x model-kind sweep.
//!
//! The dataset is split once; every run trains on the same partition, which
//! makes per-combination comparisons paired. Per-run seeds are derived from
//! `(base seed, serial, kind)`, so adding or dropping runs never changes the
//! randomness of the others, and results do not depend on the worker count.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::{enumerate_combinations, FeatureId, FeatureSet};
use crate::metrics::{rank_features, CorrelationReport, EvalResult};
use crate::models::{self, Hyperparams, ModelKind};
use crate::seed;
use crate::split::{self, SplitSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepPlan {
    pub serials: Vec<u8>,
    pub kinds: Vec<ModelKind>,
    pub hyperparams: Hyperparams,
    pub split: SplitSpec,
    pub base_seed: u64,
    pub workers: usize,
    /// Record failing runs and continue instead of aborting.
    pub keep_going: bool,
}

impl Default for SweepPlan {
    fn default() -> Self {
        SweepPlan {
            serials: (1..=31).collect(),
            kinds: ModelKind::ALL.to_vec(),
            hyperparams: Hyperparams::default(),
            split: SplitSpec::default(),
            base_seed: 42,
            workers: 1,
            keep_going: false,
        }
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.serials.is_empty() || self.kinds.is_empty() {
            return Err(Error::InvalidConfig("sweep plan selects no runs".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("workers must be >= 1".into()));
        }
        self.hyperparams.validate()?;
        self.split.validate()?;
        self.runs().map(|_| ())
    }

    /// Runs in report order: serial-major, then kinds in plan order.
    pub fn runs(&self) -> Result<Vec<(FeatureSet, ModelKind)>> {
        let mut serials = self.serials.clone();
        serials.sort_unstable();
        serials.dedup();
        let mut kinds = self.kinds.clone();
        kinds.dedup();
        let mut out = Vec::with_capacity(serials.len() * kinds.len());
        for s in serials {
            let fs = FeatureSet::from_serial(s)?;
            out.extend(kinds.iter().map(|&k| (fs, k)));
        }
        Ok(out)
    }

    /// Hash of everything that determines a run's outcome besides the data
    /// and the (serial, kind) key.
    pub fn config_hash(&self) -> String {
        let doc = serde_json::json!({
            "hyperparams": self.hyperparams,
            "split": self.split,
            "base_seed": self.base_seed,
        });
        hex::encode(Sha256::digest(doc.to_string().as_bytes()))
    }

    /// Hyperparameters for one run, with seeds derived from the run key.
    pub fn run_hyperparams(&self, serial: u8, kind: ModelKind) -> Hyperparams {
        let s = seed::derive(self.base_seed, &[u64::from(serial), kind.code()]);
        Hyperparams {
            dtc_seed: s,
            rf_seed: s,
            knn_seed: s,
            ..self.hyperparams.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub software_version: String,
    pub dataset_hash: String,
    pub config_hash: String,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub partition_hash: String,
    /// One split shared by every run.
    pub shared_split: bool,
    pub split: SplitSpec,
    pub base_seed: u64,
    pub standardize: bool,
    pub hyperparams: Hyperparams,
    pub serials: Vec<u8>,
    pub kinds: Vec<ModelKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SerialAverage {
    pub serial: u8,
    pub label: String,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub n_kinds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub serial: u8,
    pub kind: ModelKind,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub metadata: SweepMetadata,
    pub results: Vec<EvalResult>,
    pub averages: Vec<SerialAverage>,
    pub failures: Vec<RunFailure>,
    pub correlation: CorrelationReport,
    /// Set when the sweep was interrupted before every run finished.
    pub cancelled: bool,
}

impl SweepReport {
    pub fn result(&self, serial: u8, kind: ModelKind) -> Option<&EvalResult> {
        self.results.iter().find(|r| r.serial == serial && r.kind == kind)
    }

    pub fn average(&self, serial: u8) -> Option<&SerialAverage> {
        self.averages.iter().find(|a| a.serial == serial)
    }

    pub fn is_complete(&self) -> bool {
        !self.cancelled
            && self.failures.is_empty()
            && self.results.len() == self.metadata.serials.len() * self.metadata.kinds.len()
    }

    /// Serialization with timing fields zeroed; equal inputs and seeds give
    /// byte-identical output.
    pub fn canonical_json(&self) -> Result<String> {
        let mut c = self.clone();
        c.results.iter_mut().for_each(|r| r.seconds = 0.0);
        Ok(serde_json::to_string(&c)?)
    }

    pub fn canonical_hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_json()?.as_bytes())))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }

    /// One row per run: serial, label, kind, acc, f1, k, seconds.
    pub fn write_runs_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["serial", "label", "kind", "accuracy", "weighted_f1", "macro_f1", "k", "seconds"])?;
        for r in &self.results {
            let label = FeatureSet::from_serial(r.serial)?.label();
            w.write_record([
                r.serial.to_string(),
                label.to_string(),
                r.kind.id().to_string(),
                r.accuracy.to_string(),
                r.weighted_f1.to_string(),
                r.macro_f1.to_string(),
                r.k.map(|k| k.to_string()).unwrap_or_default(),
                format!("{:.3}", r.seconds),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Previously completed runs that may be reused.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResumeState {
    pub dataset_hash: String,
    pub config_hash: String,
    pub results: Vec<EvalResult>,
}

#[derive(Default)]
pub struct SweepOptions<'a> {
    pub resume: Option<ResumeState>,
    /// Called once per freshly computed result, from worker threads.
    pub on_result: Option<&'a (dyn Fn(&EvalResult) + Sync)>,
    /// Checked before each run starts; set it to drain the sweep.
    pub cancel: Option<&'a AtomicBool>,
}

/// Per-serial means over `kinds`. Every serial present must have a result for
/// each kind.
pub fn aggregate_averages(results: &[EvalResult], kinds: &[ModelKind]) -> Result<Vec<SerialAverage>> {
    let mut by_serial: BTreeMap<u8, Vec<&EvalResult>> = BTreeMap::new();
    for r in results {
        by_serial.entry(r.serial).or_default().push(r);
    }
    by_serial
        .into_iter()
        .map(|(serial, rs)| {
            let picked = kinds
                .iter()
                .map(|&k| {
                    rs.iter()
                        .find(|r| r.kind == k)
                        .copied()
                        .ok_or(Error::IncompleteSerial { serial, kind: k })
                })
                .collect::<Result<Vec<_>>>()?;
            let n = picked.len() as f64;
            Ok(SerialAverage {
                serial,
                label: FeatureSet::from_serial(serial)?.label().to_string(),
                accuracy: picked.iter().map(|r| r.accuracy).sum::<f64>() / n,
                weighted_f1: picked.iter().map(|r| r.weighted_f1).sum::<f64>() / n,
                n_kinds: picked.len(),
            })
        })
        .collect()
}

enum Outcome {
    Done(Box<EvalResult>),
    Failed(Error),
    Skipped,
}

fn run_one(
    train: &Dataset,
    test: &Dataset,
    fs: &FeatureSet,
    kind: ModelKind,
    hp: &Hyperparams,
    partition_hash: &str,
) -> Result<EvalResult> {
    let start = Instant::now();
    let tr = train.select_features(fs)?;
    let te = test.select_features(fs)?;
    let model = models::train(kind, &tr, hp, Some(&te))?;
    let pred = model.predict(&te)?;
    let mut r = EvalResult::score(fs.serial(), kind, te.labels(), &pred)?;
    r.k = model.info.chosen_k;
    r.converged = model.info.mlr.map(|m| m.converged);
    r.partition_hash = partition_hash.to_string();
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

pub fn run_sweep(ds: &Dataset, plan: &SweepPlan) -> Result<SweepReport> {
    run_sweep_with(ds, plan, SweepOptions::default())
}

pub fn run_sweep_with(ds: &Dataset, plan: &SweepPlan, opts: SweepOptions<'_>) -> Result<SweepReport> {
    plan.validate()?;
    for f in FeatureId::ALL {
        if ds.column_index(f.column_name()).is_none() {
            return Err(Error::FeatureAbsent(f.column_name().to_string()));
        }
    }
    let runs = plan.runs()?;
    let dataset_hash = ds.content_hash();
    let config_hash = plan.config_hash();

    let partition = split::partition(ds, &plan.split)?;
    let partition_hash = partition.hash();
    let train = ds.subset(&partition.train);
    let test = ds.subset(&partition.test);

    let SweepOptions { resume, on_result, cancel } = opts;
    let reusable: BTreeMap<(u8, ModelKind), EvalResult> = match resume {
        Some(state) if state.dataset_hash == dataset_hash && state.config_hash == config_hash => state
            .results
            .into_iter()
            .filter(|r| r.partition_hash == partition_hash)
            .map(|r| ((r.serial, r.kind), r))
            .collect(),
        Some(_) => {
            log::warn!("resume state does not match this dataset/configuration; ignoring it");
            BTreeMap::new()
        }
        None => BTreeMap::new(),
    };
    if !reusable.is_empty() {
        log::info!("reusing {} completed runs", reusable.len());
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let abort = AtomicBool::new(false);
    let cancelled = || cancel.is_some_and(|c| c.load(Ordering::SeqCst));

    let outcomes: Vec<Outcome> = pool.install(|| {
        runs.par_iter()
            .map(|&(fs, kind)| {
                if let Some(r) = reusable.get(&(fs.serial(), kind)) {
                    return Outcome::Done(Box::new(r.clone()));
                }
                if abort.load(Ordering::SeqCst) || cancelled() {
                    return Outcome::Skipped;
                }
                let hp = plan.run_hyperparams(fs.serial(), kind);
                match run_one(&train, &test, &fs, kind, &hp, &partition_hash) {
                    Ok(r) => {
                        log::info!(
                            "serial {:>2} {:<5} acc {:.4} f1 {:.4} ({:.1}s)",
                            r.serial,
                            kind.to_string(),
                            r.accuracy,
                            r.weighted_f1,
                            r.seconds
                        );
                        if let Some(cb) = on_result {
                            cb(&r);
                        }
                        Outcome::Done(Box::new(r))
                    }
                    Err(e) => {
                        if !plan.keep_going {
                            abort.store(true, Ordering::SeqCst);
                        }
                        Outcome::Failed(e)
                    }
                }
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = false;
    for (&(fs, kind), outcome) in runs.iter().zip(outcomes) {
        match outcome {
            Outcome::Done(r) => results.push(*r),
            Outcome::Failed(e) if !plan.keep_going => {
                return Err(Error::RunFailed {
                    serial: fs.serial(),
                    kind,
                    source: Box::new(e),
                })
            }
            Outcome::Failed(e) => failures.push(RunFailure {
                serial: fs.serial(),
                kind,
                error: e.to_string(),
            }),
            Outcome::Skipped => skipped = true,
        }
    }

    // averages only for serials with every planned kind present
    let complete: Vec<EvalResult> = results
        .iter()
        .filter(|r| {
            plan.kinds
                .iter()
                .all(|&k| results.iter().any(|o| o.serial == r.serial && o.kind == k))
        })
        .cloned()
        .collect();
    let averages = aggregate_averages(&complete, &plan.kinds)?;

    let mut serials: Vec<u8> = runs.iter().map(|(fs, _)| fs.serial()).collect();
    serials.dedup();
    let mut kinds = plan.kinds.clone();
    kinds.dedup();

    Ok(SweepReport {
        metadata: SweepMetadata {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_hash,
            config_hash,
            n_rows: ds.n_rows(),
            n_train: train.n_rows(),
            n_test: test.n_rows(),
            partition_hash,
            shared_split: true,
            split: plan.split,
            base_seed: plan.base_seed,
            standardize: plan.hyperparams.standardize,
            hyperparams: plan.hyperparams.clone(),
            serials,
            kinds,
        },
        results,
        averages,
        failures,
        correlation: rank_features(ds)?,
        cancelled: skipped,
    })
}

/// Serials of the catalog, for plans that want every combination.
pub fn all_serials() -> Vec<u8> {
    enumerate_combinations().iter().map(|fs| fs.serial()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticConfig};

    fn result(serial: u8, kind: ModelKind, acc: f64) -> EvalResult {
        let sf = crate::data::Sf::new(7).unwrap();
        let mut r = EvalResult::score(serial, kind, &[sf], &[sf]).unwrap();
        r.accuracy = acc;
        r.weighted_f1 = acc;
        r
    }

    #[test]
    fn averages_of_equal_values() {
        let rs: Vec<EvalResult> = ModelKind::ALL.iter().map(|&k| result(1, k, 0.5)).collect();
        let avg = aggregate_averages(&rs, &ModelKind::ALL).unwrap();
        assert_eq!(avg.len(), 1);
        assert_eq!(avg[0].accuracy, 0.5);
    }

    #[test]
    fn reference_row_averages() {
        let row = |serial, vals: [f64; 4]| -> Vec<EvalResult> {
            [ModelKind::Knn, ModelKind::Mlr, ModelKind::Dtc, ModelKind::Rf]
                .iter()
                .zip(vals)
                .map(|(&k, v)| result(serial, k, v / 100.0))
                .collect()
        };
        let mut rs = row(6, [64.43, 59.69, 66.23, 66.21]);
        rs.extend(row(31, [66.48, 60.33, 68.04, 68.05]));
        let avg = aggregate_averages(&rs, &ModelKind::ALL).unwrap();
        assert!((avg[0].accuracy - 0.6414).abs() < 1e-12);
        assert!((avg[1].accuracy - 0.65725).abs() < 1e-12);
    }

    #[test]
    fn missing_kind_is_an_error() {
        let rs = vec![result(3, ModelKind::Knn, 0.4), result(3, ModelKind::Rf, 0.4)];
        let err = aggregate_averages(&rs, &ModelKind::ALL).unwrap_err();
        assert!(matches!(err, Error::IncompleteSerial { serial: 3, kind: ModelKind::Dtc }));
    }

    fn small_plan() -> SweepPlan {
        SweepPlan {
            serials: vec![6],
            hyperparams: Hyperparams {
                rf_n_estimators: 5,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn restricted_plan_gives_four_runs() {
        let ds = generate_synthetic(&SyntheticConfig { n_rows: 400, ..Default::default() }).unwrap();
        let rep = run_sweep(&ds, &small_plan()).unwrap();
        assert_eq!(rep.results.len(), 4);
        assert!(rep.results.iter().all(|r| r.serial == 6));
        assert!(rep.results.iter().all(|r| r.partition_hash == rep.metadata.partition_hash));
        assert_eq!(rep.averages.len(), 1);
        assert!(rep.is_complete());
        assert!(rep.result(6, ModelKind::Knn).unwrap().k.is_some());
    }

    #[test]
    fn failing_run_aborts_or_is_recorded() {
        let ds = generate_synthetic(&SyntheticConfig { n_rows: 30, ..Default::default() }).unwrap();
        // k up to 20 but with keep-going the remaining kinds still finish
        let plan = SweepPlan {
            hyperparams: Hyperparams {
                knn_k_range: crate::models::KRange { min: 1, max: 50 },
                rf_n_estimators: 3,
                ..Default::default()
            },
            serials: vec![2],
            ..Default::default()
        };
        let err = run_sweep(&ds, &plan).unwrap_err();
        assert!(matches!(err, Error::RunFailed { serial: 2, kind: ModelKind::Knn, .. }));

        let rep = run_sweep(&ds, &SweepPlan { keep_going: true, ..plan }).unwrap();
        assert_eq!(rep.failures.len(), 1);
        assert_eq!(rep.results.len(), 3);
        assert!(rep.averages.is_empty());
        assert!(!rep.is_complete());
    }

    #[test]
    fn resume_reuses_matching_results() {
        let ds = generate_synthetic(&SyntheticConfig { n_rows: 300, ..Default::default() }).unwrap();
        let plan = small_plan();
        let full = run_sweep(&ds, &plan).unwrap();
        let state = ResumeState {
            dataset_hash: full.metadata.dataset_hash.clone(),
            config_hash: full.metadata.config_hash.clone(),
            results: full.results[..2].to_vec(),
        };
        let seen = std::sync::Mutex::new(0usize);
        let cb = |_: &EvalResult| *seen.lock().unwrap() += 1;
        let resumed = run_sweep_with(
            &ds,
            &plan,
            SweepOptions {
                resume: Some(state),
                on_result: Some(&cb),
                cancel: None,
            },
        )
        .unwrap();
        assert_eq!(*seen.lock().unwrap(), 2);
        assert_eq!(resumed.canonical_json().unwrap(), full.canonical_json().unwrap());
    }

    #[test]
    fn cancel_flag_drains() {
        let ds = generate_synthetic(&SyntheticConfig { n_rows: 200, ..Default::default() }).unwrap();
        let flag = AtomicBool::new(true);
        let rep = run_sweep_with(
            &ds,
            &small_plan(),
            SweepOptions {
                cancel: Some(&flag),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(rep.cancelled);
        assert!(rep.results.is_empty());
    }
}
