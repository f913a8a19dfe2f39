//! Pearson filter ranking of features against the SF label.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::features::FeatureId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pearson {
    /// 0 when `degenerate`.
    pub r: f64,
    /// One of the inputs had zero variance.
    pub degenerate: bool,
}

/// Pearson correlation with population moments.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Pearson {
            r: 0.0,
            degenerate: true,
        });
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Pearson {
        r,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCorrelation {
    pub feature: FeatureId,
    pub r: f64,
    pub abs_r: f64,
    /// 1 is the strongest.
    pub rank: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n_samples: usize,
    /// Canonical feature order.
    pub features: Vec<FeatureCorrelation>,
}

impl CorrelationReport {
    /// Entries sorted by rank.
    pub fn ranked(&self) -> Vec<&FeatureCorrelation> {
        let mut v: Vec<&FeatureCorrelation> = self.features.iter().collect();
        v.sort_by_key(|f| f.rank);
        v
    }

    pub fn rank_of(&self, f: FeatureId) -> Option<usize> {
        self.features.iter().find(|c| c.feature == f).map(|c| c.rank)
    }
}

/// Rank the five canonical features by |r| against SF (as 7..=12). Ties keep
/// canonical order; degenerate features rank after all others.
pub fn rank_features(ds: &Dataset) -> Result<CorrelationReport> {
    let sf: Vec<f64> = ds.labels().iter().map(|l| f64::from(l.value())).collect();
    let mut features = FeatureId::ALL
        .iter()
        .map(|&f| {
            let j = ds
                .column_index(f.column_name())
                .ok_or_else(|| Error::FeatureAbsent(f.column_name().to_string()))?;
            let p = pearson(&ds.column(j), &sf)?;
            Ok(FeatureCorrelation {
                feature: f,
                r: p.r,
                abs_r: p.r.abs(),
                rank: 0,
                degenerate: p.degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (&features[a], &features[b]);
        fa.degenerate
            .cmp(&fb.degenerate)
            .then(fb.abs_r.total_cmp(&fa.abs_r))
            .then(a.cmp(&b))
    });
    for (rank, &i) in order.iter().enumerate() {
        features[i].rank = rank + 1;
    }
    Ok(CorrelationReport {
        n_samples: ds.n_rows(),
        features,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::Sf;

    #[test]
    fn perfect_linear() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!((pearson(&x, &y).unwrap().r - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn hand_example() {
        // means 2.5, cov sum 3, var sums 5 and 5 -> r = 3/5
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap().r;
        assert!((r - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn constant_is_degenerate() {
        let p = pearson(&[3.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(p.degenerate);
        assert_eq!(p.r, 0.0);
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    }

    fn five_col(n: usize, f: impl Fn(usize, usize) -> f64, label: impl Fn(usize) -> u8) -> Dataset {
        let cols = FeatureId::ALL.iter().map(|c| c.column_name().to_string()).collect();
        let rows = (0..n).map(|i| (0..5).map(|j| f(i, j)).collect()).collect();
        let labels = (0..n).map(|i| Sf::new(label(i)).unwrap()).collect();
        Dataset::new(cols, rows, labels).unwrap()
    }

    #[test]
    fn constant_feature_ranks_last() {
        let ds = five_col(
            60,
            |i, j| match j {
                0 => 5.0, // constant RSSI
                1 => (i % 6) as f64,
                _ => ((i * (j + 3)) % 11) as f64,
            },
            |i| 7 + (i % 6) as u8,
        );
        let cr = rank_features(&ds).unwrap();
        assert_eq!(cr.rank_of(FeatureId::Rssi), Some(5));
        assert!(cr.features[0].degenerate);
        assert_eq!(cr.rank_of(FeatureId::Snr), Some(1));
        let mut ranks: Vec<usize> = cr.features.iter().map(|f| f.rank).collect();
        ranks.sort();
        assert_eq!(ranks, vec![1, 2, 3, 4, 5]);
    }

    proptest! {
        #[test]
        fn symmetric_and_affine_equivariant(
            xy in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..60),
            a in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
            b in -100.0f64..100.0,
        ) {
            let (x, y): (Vec<f64>, Vec<f64>) = xy.into_iter().unzip();
            let r = pearson(&x, &y).unwrap();
            prop_assume!(!r.degenerate);
            prop_assert_eq!(r.r, pearson(&y, &x).unwrap().r);
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let r2 = pearson(&ax, &y).unwrap();
            prop_assert!((r2.r - a.signum() * r.r).abs() <= 1e-9);
        }
    }
}
