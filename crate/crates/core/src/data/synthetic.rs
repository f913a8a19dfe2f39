//! LoRaWAN-like synthetic data from a log-distance path-loss channel.
//!
//! Per row:
//!
//! ```text
//! PL(d)  = PL0 + 10 * gamma * log10(d / 1 m) - g_h * h + X_sigma
//! RSSI   = P_tx - PL(d)
//! SNR    = RSSI - N_floor + X_jitter
//! SF     = smallest SF whose demodulation floor <= SNR, else SF12
//! ```
//!
//! `X_sigma ~ N(0, sigma^2)` is log-normal shadowing, `X_jitter ~ N(0, j^2)`
//! receiver noise. SF is a deterministic function of SNR, which gives the
//! data a known dominant feature.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Dataset, Sf};
use crate::error::{Error, Result};
use crate::features::FeatureId;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_rows: usize,
    pub seed: u64,
    pub path_loss_exponent: f64,
    /// Loss at the 1 m reference distance, dB.
    pub reference_loss_db: f64,
    pub shadowing_sigma_db: f64,
    pub snr_jitter_db: f64,
    pub tx_power_dbm: f64,
    pub noise_floor_dbm: f64,
    /// Inclusive `[min, max]` gateway distance, metres.
    pub distance_range_m: [f64; 2],
    /// Draw distance log-uniformly (otherwise uniformly) over the range.
    pub log_uniform_distance: bool,
    pub antenna_heights_m: Vec<f64>,
    pub frequencies_hz: Vec<f64>,
    /// Antenna height gain, dB per metre of ED height. Zero disables it.
    pub height_gain_db_per_m: f64,
    /// Demodulation floors for SF7..SF12, dB, strictly decreasing.
    pub snr_thresholds_db: [f64; 6],
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_rows: 20_000,
            seed: 7,
            path_loss_exponent: 3.0,
            reference_loss_db: 40.0,
            shadowing_sigma_db: 3.5,
            snr_jitter_db: 1.0,
            tx_power_dbm: 14.0,
            noise_floor_dbm: -117.0,
            distance_range_m: [1_000.0, 8_000.0],
            log_uniform_distance: true,
            antenna_heights_m: vec![1.5, 3.0, 4.5, 6.0],
            frequencies_hz: vec![
                867.1e6, 867.3e6, 867.5e6, 867.7e6, 867.9e6, 868.1e6, 868.3e6, 868.5e6,
            ],
            height_gain_db_per_m: 1.0,
            snr_thresholds_db: [-7.5, -10.0, -12.5, -15.0, -17.5, -20.0],
        }
    }
}

impl SyntheticConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let cfg: SyntheticConfig = serde_json::from_reader(BufReader::new(f))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.n_rows == 0 {
            return bad("n_rows must be positive");
        }
        if !(self.shadowing_sigma_db >= 0.0) || !(self.snr_jitter_db >= 0.0) {
            return bad("noise standard deviations must be >= 0");
        }
        if self.snr_thresholds_db.windows(2).any(|w| !(w[0] > w[1])) {
            return bad("SNR thresholds must be strictly decreasing from SF7 to SF12");
        }
        let [lo, hi] = self.distance_range_m;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("distance range must satisfy 0 < min <= max");
        }
        if self.antenna_heights_m.is_empty() || self.frequencies_hz.is_empty() {
            return bad("antenna heights and frequencies must be non-empty");
        }
        let scalars = [
            self.path_loss_exponent,
            self.reference_loss_db,
            self.tx_power_dbm,
            self.noise_floor_dbm,
            self.height_gain_db_per_m,
        ];
        if scalars
            .iter()
            .chain(&self.antenna_heights_m)
            .chain(&self.frequencies_hz)
            .chain(&self.snr_thresholds_db)
            .any(|v| !v.is_finite())
        {
            return bad("all synthetic parameters must be finite");
        }
        Ok(())
    }

    /// Noise-free SNR at distance `d` and ED height `h`.
    pub fn mean_snr(&self, d: f64, h: f64) -> f64 {
        let pl = self.reference_loss_db + 10.0 * self.path_loss_exponent * d.log10()
            - self.height_gain_db_per_m * h;
        self.tx_power_dbm - pl - self.noise_floor_dbm
    }
}

/// The smallest SF whose demodulation floor is at or below `snr`, else SF12.
pub fn sf_for_snr(snr: f64, thresholds: &[f64; 6]) -> Sf {
    let k = thresholds.iter().position(|&t| t <= snr).unwrap_or(5);
    Sf::new(Sf::MIN + k as u8).expect("index within 0..6")
}

/// Generate a dataset with columns (rssi, snr, frequency, height, distance).
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, &[]);
    let [lo, hi] = cfg.distance_range_m;
    let mut values = Vec::with_capacity(cfg.n_rows * 5);
    let mut labels = Vec::with_capacity(cfg.n_rows);
    for _ in 0..cfg.n_rows {
        let d = if cfg.log_uniform_distance {
            rng.random_range(lo.ln()..=hi.ln()).exp().clamp(lo, hi)
        } else {
            rng.random_range(lo..=hi)
        };
        let h = cfg.antenna_heights_m[rng.random_range(0..cfg.antenna_heights_m.len())];
        let f = cfg.frequencies_hz[rng.random_range(0..cfg.frequencies_hz.len())];
        let shadow: f64 = rng.sample(StandardNormal);
        let jitter: f64 = rng.sample(StandardNormal);

        let pl = cfg.reference_loss_db + 10.0 * cfg.path_loss_exponent * d.log10()
            - cfg.height_gain_db_per_m * h
            + cfg.shadowing_sigma_db * shadow;
        let rssi = cfg.tx_power_dbm - pl;
        let snr = rssi - cfg.noise_floor_dbm + cfg.snr_jitter_db * jitter;

        values.extend_from_slice(&[rssi, snr, f, h, d]);
        labels.push(sf_for_snr(snr, &cfg.snr_thresholds_db));
    }
    let columns = FeatureId::ALL.iter().map(|f| f.column_name().to_string()).collect();
    Dataset::from_flat(columns, values, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SyntheticConfig::default().validate().unwrap();
    }

    #[test]
    fn labels_in_range_and_rows_counted() {
        let cfg = SyntheticConfig {
            n_rows: 1000,
            seed: 7,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        assert_eq!(ds.n_rows(), 1000);
        assert!(ds.labels().iter().all(|l| (7..=12).contains(&l.value())));
        // every class shows up at default settings
        assert_eq!(ds.label_histogram().len(), 6);
    }

    #[test]
    fn seeded_determinism() {
        let cfg = SyntheticConfig {
            n_rows: 500,
            ..Default::default()
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a.content_hash(), b.content_hash());
        let c = generate_synthetic(&SyntheticConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn threshold_rule_by_hand() {
        let t = SyntheticConfig::default().snr_thresholds_db;
        let sf = |s| sf_for_snr(s, &t).value();
        assert_eq!(sf(-5.0), 7);
        assert_eq!(sf(-7.5), 7);
        assert_eq!(sf(-7.6), 8);
        assert_eq!(sf(-12.5), 9);
        assert_eq!(sf(-19.9), 12);
        assert_eq!(sf(-40.0), 12);
    }

    #[test]
    fn single_distance_at_minus_five_db_is_sf7() {
        // Solve for the distance whose noise-free SNR is -5 dB.
        let base = SyntheticConfig {
            n_rows: 3,
            shadowing_sigma_db: 0.0,
            snr_jitter_db: 0.0,
            antenna_heights_m: vec![1.5],
            frequencies_hz: vec![868.1e6],
            ..Default::default()
        };
        let h = 1.5;
        let pl_needed = base.tx_power_dbm - base.noise_floor_dbm + 5.0 + base.height_gain_db_per_m * h;
        let d = 10f64.powf((pl_needed - base.reference_loss_db) / (10.0 * base.path_loss_exponent));
        let cfg = SyntheticConfig {
            distance_range_m: [d, d],
            ..base
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for i in 0..3 {
            assert!((ds.row(i)[1] + 5.0).abs() < 1e-9);
            assert_eq!(ds.labels()[i].value(), 7);
        }
    }

    #[test]
    fn noise_free_rows_follow_closed_form() {
        let cfg = SyntheticConfig {
            n_rows: 2000,
            shadowing_sigma_db: 0.0,
            snr_jitter_db: 0.0,
            ..Default::default()
        };
        let ds = generate_synthetic(&cfg).unwrap();
        for (row, label) in ds.rows().zip(ds.labels()) {
            let snr = cfg.mean_snr(row[4], row[3]);
            assert!((snr - row[1]).abs() < 1e-9);
            assert_eq!(*label, sf_for_snr(snr, &cfg.snr_thresholds_db));
        }
    }

    #[test]
    fn invalid_configs() {
        let ok = SyntheticConfig::default();
        for cfg in [
            SyntheticConfig { n_rows: 0, ..ok.clone() },
            SyntheticConfig { shadowing_sigma_db: -1.0, ..ok.clone() },
            SyntheticConfig { snr_thresholds_db: [-7.5, -10.0, -10.0, -15.0, -17.5, -20.0], ..ok.clone() },
            SyntheticConfig { distance_range_m: [10.0, 1.0], ..ok.clone() },
            SyntheticConfig { antenna_heights_m: vec![], ..ok.clone() },
        ] {
            assert!(generate_synthetic(&cfg).is_err());
        }
    }
}
