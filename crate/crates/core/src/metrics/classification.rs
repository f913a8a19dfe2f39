use serde::{Deserialize, Serialize};

use crate::data::Sf;
use crate::error::{Error, Result};

fn check(y_true: &[Sf], y_pred: &[Sf]) -> Result<()> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(y_true: &[Sf], y_pred: &[Sf]) -> Result<f64> {
    check(y_true, y_pred)?;
    let hits = y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: Sf,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    /// Support-weighted mean of per-class F1.
    pub weighted: f64,
    /// Unweighted mean of per-class F1.
    pub macro_avg: f64,
    pub per_class: Vec<ClassScore>,
    /// Number of 0/0 precision or recall terms replaced by 0.
    pub zero_division: usize,
}

fn ratio(num: u64, den: u64, zero_division: &mut usize) -> f64 {
    if den == 0 {
        *zero_division += 1;
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Assemble the per-class table from `(class, tp, fp, fn)` tuples.
fn report_from_counts(counts: &[(Sf, u64, u64, u64)], n: usize) -> F1Report {
    let mut zero_division = 0;
    let per_class: Vec<ClassScore> = counts
        .iter()
        .map(|&(class, tp, fp, fn_)| {
            let precision = ratio(tp, tp + fp, &mut zero_division);
            let recall = ratio(tp, tp + fn_, &mut zero_division);
            ClassScore {
                class,
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: (tp + fn_) as usize,
            }
        })
        .collect();
    let weighted = per_class
        .iter()
        .map(|c| c.support as f64 / n as f64 * c.f1)
        .sum();
    let macro_avg = per_class.iter().map(|c| c.f1).sum::<f64>() / per_class.len() as f64;
    F1Report {
        weighted,
        macro_avg,
        per_class,
        zero_division,
    }
}

/// Per-class precision/recall/F1 over every class in `y_true` or `y_pred`,
/// plus their support-weighted mean.
pub fn f1_weighted(y_true: &[Sf], y_pred: &[Sf]) -> Result<F1Report> {
    check(y_true, y_pred)?;
    let mut tally = [(0u64, 0u64, 0u64); 6];
    let mut seen = [false; 6];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let (ti, pi) = ((t.value() - Sf::MIN) as usize, (p.value() - Sf::MIN) as usize);
        seen[ti] = true;
        seen[pi] = true;
        if ti == pi {
            tally[ti].0 += 1;
        } else {
            tally[pi].1 += 1;
            tally[ti].2 += 1;
        }
    }
    let counts: Vec<(Sf, u64, u64, u64)> = Sf::all()
        .zip(tally)
        .zip(seen)
        .filter(|&(_, s)| s)
        .map(|((sf, (tp, fp, fn_)), _)| (sf, tp, fp, fn_))
        .collect();
    Ok(report_from_counts(&counts, y_true.len()))
}

/// Counts of (true class, predicted class) over the union of observed classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<Sf>,
    /// `counts[i][j]`: true `classes[i]`, predicted `classes[j]`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_labels(y_true: &[Sf], y_pred: &[Sf]) -> Result<Self> {
        check(y_true, y_pred)?;
        let mut classes: Vec<Sf> = y_true.iter().chain(y_pred).copied().collect();
        classes.sort_unstable();
        classes.dedup();
        let c = classes.len();
        let mut counts = vec![vec![0u64; c]; c];
        for (t, p) in y_true.iter().zip(y_pred) {
            let i = classes.binary_search(t).unwrap();
            let j = classes.binary_search(p).unwrap();
            counts[i][j] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    /// Precision/recall/F1 from row and column sums.
    pub fn f1_report(&self) -> F1Report {
        let c = self.classes.len();
        let counts: Vec<(Sf, u64, u64, u64)> = (0..c)
            .map(|i| {
                let tp = self.counts[i][i];
                let col: u64 = (0..c).map(|r| self.counts[r][i]).sum();
                let row: u64 = self.counts[i].iter().sum();
                (self.classes[i], tp, col - tp, row - tp)
            })
            .collect();
        report_from_counts(&counts, self.total() as usize)
    }
}
