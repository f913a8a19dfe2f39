//! The five-feature catalog and its 31 non-empty combinations.
//!
//! Combination serials follow a fixed numbering, which is also the x-axis of
//! the average-metric figure. The triple ordering is not lexicographic
//! (serial 16 is RSSI+SNR+Distance, serial 18 is RSSI+SNR+Frequency), so the
//! table below is written out literally rather than generated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the five candidate input features, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureId {
    Rssi,
    Snr,
    Frequency,
    Height,
    Distance,
}

impl FeatureId {
    pub const ALL: [FeatureId; 5] = [
        FeatureId::Rssi,
        FeatureId::Snr,
        FeatureId::Frequency,
        FeatureId::Height,
        FeatureId::Distance,
    ];

    /// Zero-based canonical index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn bit(self) -> u8 {
        1 << self.index()
    }

    /// Column name used inside a [`Dataset`](crate::Dataset) and in the
    /// canonical CSV layout.
    pub fn column_name(self) -> &'static str {
        match self {
            FeatureId::Rssi => "rssi",
            FeatureId::Snr => "snr",
            FeatureId::Frequency => "frequency",
            FeatureId::Height => "height",
            FeatureId::Distance => "distance",
        }
    }

    /// Display name as it appears in combination labels.
    pub fn label(self) -> &'static str {
        match self {
            FeatureId::Rssi => "RSSI",
            FeatureId::Snr => "SNR",
            FeatureId::Frequency => "Frequency",
            FeatureId::Height => "Height",
            FeatureId::Distance => "Distance",
        }
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureId::ALL
            .into_iter()
            .find(|f| f.column_name().eq_ignore_ascii_case(s) || f.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::FeatureAbsent(s.to_string()))
    }
}

use FeatureId::{Distance as D, Frequency as F, Height as H, Rssi as R, Snr as S};

/// (serial, printed label, members) for all 31 combinations.
const COMBOS: [(u8, &str, &[FeatureId]); 31] = [
    (1, "RSSI", &[R]),
    (2, "SNR", &[S]),
    (3, "Frequency", &[F]),
    (4, "Height", &[H]),
    (5, "Distance", &[D]),
    (6, "RSSI+SNR", &[R, S]),
    (7, "RSSI+Frequency", &[R, F]),
    (8, "RSSI+Height", &[R, H]),
    (9, "RSSI+Distance", &[R, D]),
    (10, "SNR+Frequency", &[S, F]),
    (11, "SNR+Height", &[S, H]),
    (12, "SNR+Distance", &[S, D]),
    (13, "Frequency+Height", &[F, H]),
    (14, "Frequency+Distance", &[F, D]),
    (15, "Height+Distance", &[H, D]),
    (16, "RSSI+SNR+Distance", &[R, S, D]),
    (17, "RSSI+SNR+Height", &[R, S, H]),
    (18, "RSSI+SNR+Frequency", &[R, S, F]),
    (19, "RSSI+Distance+Height", &[R, D, H]),
    (20, "RSSI+Distance+Frequency", &[R, D, F]),
    (21, "RSSI+Height+Frequency", &[R, H, F]),
    (22, "SNR+Distance+Height", &[S, D, H]),
    (23, "SNR+Distance+Frequency", &[S, D, F]),
    (24, "SNR+Frequency+Height", &[S, F, H]),
    (25, "Frequency+Distance+Height", &[F, D, H]),
    (26, "RSSI+SNR+Distance+Height", &[R, S, D, H]),
    (27, "RSSI+SNR+Distance+Frequency", &[R, S, D, F]),
    (28, "RSSI+SNR+Frequency+Height", &[R, S, F, H]),
    (29, "RSSI+Frequency+Distance+Height", &[R, F, D, H]),
    (30, "Frequency+SNR+Distance+Height", &[F, S, D, H]),
    (31, "RSSI+SNR+Frequency+Distance+Height", &[R, S, F, D, H]),
];

/// A non-empty subset of the five features tagged with its serial (1..=31).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureSet {
    mask: u8,
    serial: u8,
}

impl FeatureSet {
    /// Look up a combination by serial.
    pub fn from_serial(serial: u8) -> Result<Self> {
        COMBOS
            .iter()
            .find(|(s, _, _)| *s == serial)
            .map(|&(serial, _, members)| FeatureSet {
                mask: members.iter().fold(0, |m, f| m | f.bit()),
                serial,
            })
            .ok_or_else(|| Error::InvalidConfig(format!("no feature combination with serial {serial}")))
    }

    /// Look up the combination whose member set equals `members`.
    pub fn from_members(members: &[FeatureId]) -> Result<Self> {
        let mask = members.iter().fold(0u8, |m, f| m | f.bit());
        enumerate_combinations()
            .iter()
            .copied()
            .find(|fs| fs.mask == mask)
            .ok_or_else(|| Error::InvalidConfig("empty feature set".into()))
    }

    pub fn serial(&self) -> u8 {
        self.serial
    }

    pub fn mask(&self) -> u8 {
        self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, f: FeatureId) -> bool {
        self.mask & f.bit() != 0
    }

    /// Members in canonical order (RSSI, SNR, Frequency, Height, Distance).
    pub fn members(&self) -> Vec<FeatureId> {
        FeatureId::ALL.into_iter().filter(|f| self.contains(*f)).collect()
    }

    pub fn label(&self) -> &'static str {
        combo_label(self)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.serial, self.label())
    }
}

/// The printed label for a combination, e.g. `"Frequency+SNR+Distance+Height"`.
pub fn combo_label(fs: &FeatureSet) -> &'static str {
    COMBOS[fs.serial as usize - 1].1
}

/// All 31 combinations ordered by serial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComboCatalog {
    sets: Vec<FeatureSet>,
}

impl ComboCatalog {
    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FeatureSet> {
        self.sets.iter()
    }

    pub fn get(&self, serial: u8) -> Option<&FeatureSet> {
        self.sets.iter().find(|fs| fs.serial == serial)
    }

    /// Combinations with exactly `size` members, in serial order.
    pub fn of_size(&self, size: usize) -> impl Iterator<Item = &FeatureSet> {
        self.sets.iter().filter(move |fs| fs.len() == size)
    }

    pub fn to_entries(&self) -> Vec<CatalogEntry> {
        self.sets
            .iter()
            .map(|fs| CatalogEntry {
                serial: fs.serial,
                label: fs.label().to_string(),
                members: fs.members(),
            })
            .collect()
    }

    /// JSON dump of `(serial, label, members)` for report tooling.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_entries())?)
    }
}

impl<'a> IntoIterator for &'a ComboCatalog {
    type Item = &'a FeatureSet;
    type IntoIter = std::slice::Iter<'a, FeatureSet>;

    fn into_iter(self) -> Self::IntoIter {
        self.sets.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub serial: u8,
    pub label: String,
    pub members: Vec<FeatureId>,
}

pub fn enumerate_combinations() -> ComboCatalog {
    let sets = COMBOS
        .iter()
        .map(|&(serial, _, members)| FeatureSet {
            mask: members.iter().fold(0, |m, f| m | f.bit()),
            serial,
        })
        .collect();
    ComboCatalog { sets }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;

    #[test]
    fn catalog_has_31_entries_with_binomial_histogram() {
        let cat = enumerate_combinations();
        assert_eq!(cat.len(), 31);
        let hist: Vec<usize> = (1..=5).map(|m| cat.of_size(m).count()).collect();
        assert_eq!(hist, vec![5, 10, 10, 5, 1]);
        let serials: Vec<u8> = cat.iter().map(|fs| fs.serial()).collect();
        assert_eq!(serials, (1..=31).collect::<Vec<_>>());
    }

    #[test]
    fn masks_are_a_bijection_onto_nonempty_subsets() {
        let cat = enumerate_combinations();
        let masks: HashSet<u8> = cat.iter().map(|fs| fs.mask()).collect();
        assert_eq!(masks.len(), 31);
        assert!(masks.iter().all(|&m| (1..32).contains(&m)));
    }

    #[test]
    fn sizes_are_grouped_by_serial_band() {
        let cat = enumerate_combinations();
        for fs in &cat {
            let expected = match fs.serial() {
                1..=5 => 1,
                6..=15 => 2,
                16..=25 => 3,
                26..=30 => 4,
                _ => 5,
            };
            assert_eq!(fs.len(), expected, "serial {}", fs.serial());
        }
    }

    #[test]
    fn labels_name_exactly_the_members() {
        for fs in &enumerate_combinations() {
            let mut named: Vec<FeatureId> = fs
                .label()
                .split('+')
                .map(|n| n.parse().unwrap())
                .collect();
            named.sort();
            assert_eq!(named, fs.members(), "serial {}", fs.serial());
        }
    }

    #[test]
    fn fixed_serial_table() {
        let cat = enumerate_combinations();
        assert_eq!(cat.get(6).unwrap().members(), vec![R, S]);
        assert_eq!(cat.get(16).unwrap().members(), vec![R, S, D]);
        assert_eq!(cat.get(18).unwrap().members(), vec![R, S, F]);
        assert_eq!(combo_label(cat.get(6).unwrap()), "RSSI+SNR");
        assert_eq!(combo_label(cat.get(30).unwrap()), "Frequency+SNR+Distance+Height");
        assert_eq!(combo_label(cat.get(3).unwrap()), "Frequency");
        // canonical member order is independent of the printed label order
        assert_eq!(cat.get(30).unwrap().members(), vec![S, F, H, D]);
        assert_eq!(cat.get(31).unwrap().members(), FeatureId::ALL.to_vec());
    }

    #[test]
    fn from_members_and_serial_agree() {
        assert_eq!(FeatureSet::from_members(&[S, R]).unwrap().serial(), 6);
        assert_eq!(FeatureSet::from_serial(27).unwrap().members(), vec![R, S, F, D]);
        assert!(FeatureSet::from_serial(0).is_err());
        assert!(FeatureSet::from_serial(32).is_err());
        assert!(FeatureSet::from_members(&[]).is_err());
    }

    #[test]
    fn json_dump_lists_every_serial() {
        let json = enumerate_combinations().to_json().unwrap();
        let entries: Vec<CatalogEntry> = serde_json::from_str(&json).unwrap();
        assert_eq!(entries.len(), 31);
        assert_eq!(entries[5].label, "RSSI+SNR");
        assert_eq!(entries[5].members, vec![R, S]);
    }
}
