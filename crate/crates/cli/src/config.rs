use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use sfselect::models::ModelKind;
use sfselect::{Hyperparams, SplitSpec, SyntheticConfig};

/// Everything a run needs, loadable from one JSON file. Command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,
    pub mapping: Option<PathBuf>,
    pub hyperparams: Hyperparams,
    pub split: SplitSpec,
    pub base_seed: u64,
    pub serials: Option<Vec<u8>>,
    pub kinds: Option<Vec<ModelKind>>,
    pub out: PathBuf,
    pub workers: usize,
    pub keep_going: bool,
    pub log_level: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            synthetic: None,
            mapping: None,
            hyperparams: Hyperparams::default(),
            split: SplitSpec::default(),
            base_seed: 42,
            serials: None,
            kinds: None,
            out: PathBuf::from("out"),
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            keep_going: false,
            log_level: "info".into(),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Exactly one data source must be configured.
    pub fn check_source(&self) -> Result<()> {
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => bail!("configure either a dataset path or a synthetic config, not both"),
            (None, None) => bail!("no data source: pass --dataset <csv> or --synthetic"),
            _ => Ok(()),
        }
    }
}

/// Parse `"6,16-18,31"` into serials.
pub fn parse_serials(s: &str) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u8, u8) = (a.trim().parse()?, b.trim().parse()?);
                if a > b {
                    bail!("descending serial range {part}");
                }
                out.extend(a..=b);
            }
            None => out.push(part.parse().with_context(|| format!("bad serial `{part}`"))?),
        }
    }
    if out.is_empty() {
        bail!("empty serial list");
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Parse `"knn,rf"` into model kinds, keeping the given order.
pub fn parse_kinds(s: &str) -> Result<Vec<ModelKind>> {
    let mut out: Vec<ModelKind> = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let k: ModelKind = part.parse().map_err(|e| anyhow::anyhow!("{e}"))?;
        if !out.contains(&k) {
            out.push(k);
        }
    }
    if out.is_empty() {
        bail!("empty kind list");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serial_lists() {
        assert_eq!(parse_serials("6").unwrap(), vec![6]);
        assert_eq!(parse_serials("16-18, 6,6").unwrap(), vec![6, 16, 17, 18]);
        assert!(parse_serials("9-3").is_err());
        assert!(parse_serials("x").is_err());
    }

    #[test]
    fn kind_lists() {
        assert_eq!(parse_kinds("rf,knn,rf").unwrap(), vec![ModelKind::Rf, ModelKind::Knn]);
        assert!(parse_kinds("svm").is_err());
    }

    #[test]
    fn config_round_trip() {
        let c = RunConfig {
            synthetic: Some(SyntheticConfig::default()),
            serials: Some(vec![6]),
            ..Default::default()
        };
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        assert!(back.check_source().is_ok());
        assert!(RunConfig::default().check_source().is_err());
    }
}
