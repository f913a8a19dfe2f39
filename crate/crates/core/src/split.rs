//! Seeded train/test partitioning.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 42,
            stratified: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// `floor(n * train_fraction)`, guarded against representation error
    /// (0.29 * 100 evaluates to 28.999...).
    pub fn train_size(&self, n: usize) -> usize {
        ((n as f64) * self.train_fraction + 1e-9).floor() as usize
    }
}

/// Row indices of each side of a split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Partition {
    /// SHA-256 of the train index list; equal hashes mean equal partitions.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.train.len() as u64).to_le_bytes());
        for &i in &self.train {
            h.update((i as u64).to_le_bytes());
        }
        h.update((self.test.len() as u64).to_le_bytes());
        hex::encode(h.finalize())
    }
}

pub fn partition(ds: &Dataset, spec: &SplitSpec) -> Result<Partition> {
    spec.validate()?;
    let n = ds.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let n_train = spec.train_size(n);
    let mut rng = seed::rng(spec.seed, &[]);

    let mut train = if spec.stratified {
        stratified_train(ds, n_train, &mut rng)
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng);
        idx.truncate(n_train);
        idx
    };
    train.sort_unstable();

    let mut in_train = vec![false; n];
    for &i in &train {
        in_train[i] = true;
    }
    let test: Vec<usize> = (0..n).filter(|&i| !in_train[i]).collect();
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptySplit {
            train: train.len(),
            test: test.len(),
        });
    }
    Ok(Partition { train, test })
}

/// Per-class quotas by largest remainder so they sum to `n_train`.
fn stratified_train(ds: &Dataset, n_train: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
    let n = ds.n_rows() as f64;
    let frac = n_train as f64 / n;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut classes = Vec::new();
    for (i, l) in ds.labels().iter().enumerate() {
        match classes.iter().position(|c| c == l) {
            Some(g) => groups[g].push(i),
            None => {
                classes.push(*l);
                groups.push(vec![i]);
            }
        }
    }
    // iterate classes in ascending SF order for a deterministic tie order
    let mut order: Vec<usize> = (0..classes.len()).collect();
    order.sort_by_key(|&g| classes[g]);

    let mut quota: Vec<usize> = vec![0; groups.len()];
    let mut rema: Vec<(f64, usize)> = Vec::new();
    for &g in &order {
        let exact = groups[g].len() as f64 * frac;
        quota[g] = exact.floor() as usize;
        rema.push((exact - exact.floor(), g));
    }
    let short = n_train.saturating_sub(quota.iter().sum());
    rema.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, g) in rema.iter().take(short) {
        quota[g] += 1;
    }

    let mut train = Vec::with_capacity(n_train);
    for &g in &order {
        let mut members = groups[g].clone();
        members.shuffle(rng);
        train.extend_from_slice(&members[..quota[g]]);
    }
    train
}

pub fn train_test_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let p = partition(ds, spec)?;
    Ok((ds.subset(&p.train), ds.subset(&p.test)))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::data::Sf;

    fn ds(n: usize) -> Dataset {
        let labels = (0..n).map(|i| Sf::new(7 + ((i * 7) % 6) as u8).unwrap()).collect();
        let values = (0..n).map(|i| i as f64).collect();
        Dataset::from_flat(vec!["x".into()], values, labels).unwrap()
    }

    #[test]
    fn eighty_twenty() {
        let (tr, te) = train_test_split(&ds(100), &SplitSpec::default()).unwrap();
        assert_eq!((tr.n_rows(), te.n_rows()), (80, 20));
    }

    #[test]
    fn full_dataset_sizes() {
        let spec = SplitSpec::default();
        assert_eq!(spec.train_size(930_753), 744_602);
        assert_eq!(930_753 - spec.train_size(930_753), 186_151);
        assert_eq!(SplitSpec { train_fraction: 0.29, ..spec }.train_size(100), 29);
    }

    #[test]
    fn same_seed_same_partition() {
        let d = ds(200);
        let a = partition(&d, &SplitSpec::default()).unwrap();
        let b = partition(&d, &SplitSpec::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.hash(), b.hash());
        let c = partition(&d, &SplitSpec { seed: 43, ..Default::default() }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_side_is_error() {
        let err = train_test_split(&ds(1), &SplitSpec::default()).unwrap_err();
        assert!(matches!(err, Error::EmptySplit { .. }));
        assert!(SplitSpec { train_fraction: 1.0, ..Default::default() }.validate().is_err());
        assert!(matches!(partition(&ds(0), &SplitSpec::default()), Err(Error::EmptyInput)));
    }

    proptest! {
        #[test]
        fn partition_is_exact_cover(n in 5usize..400, seed in any::<u64>(), stratified in any::<bool>(), frac in 0.2f64..0.9) {
            let d = ds(n);
            let spec = SplitSpec { train_fraction: frac, seed, stratified };
            prop_assume!(spec.train_size(n) > 0 && spec.train_size(n) < n);
            let p = partition(&d, &spec).unwrap();
            prop_assert_eq!(p.train.len(), spec.train_size(n));
            let mut all: Vec<usize> = p.train.iter().chain(&p.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

            let mut lab: Vec<Sf> = p.train.iter().chain(&p.test).map(|&i| d.labels()[i]).collect();
            let mut orig = d.labels().to_vec();
            lab.sort();
            orig.sort();
            prop_assert_eq!(lab, orig);
        }

        #[test]
        fn stratified_class_fractions(n in 20usize..500, seed in any::<u64>()) {
            let d = ds(n);
            let spec = SplitSpec { stratified: true, seed, ..Default::default() };
            let p = partition(&d, &spec).unwrap();
            for sf in Sf::all() {
                let total = d.labels().iter().filter(|&&l| l == sf).count() as f64;
                let tr = p.train.iter().filter(|&&i| d.labels()[i] == sf).count() as f64;
                prop_assert!((tr - 0.8 * total).abs() <= 1.0);
            }
        }
    }
}
