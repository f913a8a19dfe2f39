use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, Sf};
use crate::error::{Error, Result};
use crate::features::FeatureId;

/// Binds each logical column to a CSV header name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    #[serde(rename = "rssi_dBm")]
    pub rssi: String,
    #[serde(rename = "snr_dB")]
    pub snr: String,
    #[serde(rename = "frequency_Hz")]
    pub frequency: String,
    #[serde(rename = "distance_m")]
    pub distance: String,
    #[serde(rename = "antenna_height_ed_m")]
    pub height: String,
    #[serde(rename = "sf_label")]
    pub sf: String,
}

impl Default for ColumnMapping {
    /// The canonical layout written by [`write_csv`].
    fn default() -> Self {
        ColumnMapping {
            rssi: FeatureId::Rssi.column_name().into(),
            snr: FeatureId::Snr.column_name().into(),
            frequency: FeatureId::Frequency.column_name().into(),
            distance: FeatureId::Distance.column_name().into(),
            height: FeatureId::Height.column_name().into(),
            sf: "sf".into(),
        }
    }
}

impl ColumnMapping {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        let m: ColumnMapping = serde_json::from_reader(BufReader::new(f))?;
        m.validate()?;
        Ok(m)
    }

    pub fn feature_header(&self, f: FeatureId) -> &str {
        match f {
            FeatureId::Rssi => &self.rssi,
            FeatureId::Snr => &self.snr,
            FeatureId::Frequency => &self.frequency,
            FeatureId::Height => &self.height,
            FeatureId::Distance => &self.distance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut names: Vec<&str> = FeatureId::ALL.iter().map(|&f| self.feature_header(f)).collect();
        names.push(&self.sf);
        for (i, a) in names.iter().enumerate() {
            if names[i + 1..].contains(a) {
                return Err(Error::DuplicateMapping(a.to_string()));
            }
        }
        Ok(())
    }
}

/// Per-reason row rejection counts from [`load_csv`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadStats {
    pub records: usize,
    pub accepted: usize,
    pub rejected_non_numeric: usize,
    pub rejected_sf: usize,
}

impl LoadStats {
    pub fn rejected(&self) -> usize {
        self.rejected_non_numeric + self.rejected_sf
    }
}

enum SfParse {
    Ok(Sf),
    OutOfRange,
    Unparseable,
}

fn parse_sf(raw: &str) -> SfParse {
    let s = raw.trim();
    let s = s
        .strip_prefix("SF")
        .or_else(|| s.strip_prefix("sf"))
        .unwrap_or(s);
    match s.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && (0.0..=255.0).contains(&v) => match Sf::new(v as u8) {
            Some(sf) => SfParse::Ok(sf),
            None => SfParse::OutOfRange,
        },
        Ok(v) if v.is_finite() => SfParse::OutOfRange,
        _ => SfParse::Unparseable,
    }
}

/// Load the five features and the SF label from a headered CSV file.
///
/// Columns not named by `mapping` are ignored. Records with a non-numeric
/// feature value, or an SF outside 7..=12, are skipped and counted in
/// [`LoadStats`]. `NaN`/`inf` literals parse as numbers and are left for
/// [`Dataset::clean`].
pub fn load_csv(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<(Dataset, LoadStats)> {
    mapping.validate()?;
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::with_capacity(1 << 20, file));

    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_idx = FeatureId::ALL
        .iter()
        .map(|&f| find(mapping.feature_header(f)))
        .collect::<Result<Vec<_>>>()?;
    let sf_idx = find(&mapping.sf)?;

    let mut stats = LoadStats::default();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut row = [0.0f64; 5];
    let mut record = csv::StringRecord::new();
    'records: while rdr.read_record(&mut record)? {
        stats.records += 1;
        for (slot, &j) in row.iter_mut().zip(&feature_idx) {
            match record.get(j).map(|s| s.trim().parse::<f64>()) {
                Some(Ok(v)) => *slot = v,
                _ => {
                    stats.rejected_non_numeric += 1;
                    continue 'records;
                }
            }
        }
        match record.get(sf_idx).map(parse_sf) {
            Some(SfParse::Ok(sf)) => labels.push(sf),
            Some(SfParse::OutOfRange) => {
                stats.rejected_sf += 1;
                continue;
            }
            Some(SfParse::Unparseable) | None => {
                stats.rejected_non_numeric += 1;
                continue;
            }
        }
        values.extend_from_slice(&row);
        stats.accepted += 1;
    }

    let columns = FeatureId::ALL.iter().map(|f| f.column_name().to_string()).collect();
    Ok((Dataset::from_flat(columns, values, labels)?, stats))
}

/// Write `ds` as CSV: its columns followed by an `sf` column.
///
/// Floats use the shortest representation that parses back to the same bits.
pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header: Vec<&str> = ds.columns().iter().map(String::as_str).collect();
    header.push("sf");
    w.write_record(&header)?;
    let mut fields: Vec<String> = Vec::with_capacity(header.len());
    for (row, label) in ds.rows().zip(ds.labels()) {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        fields.push(label.value().to_string());
        w.write_record(&fields)?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::io::Write as _;

    use super::*;

    fn write_tmp(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    const HEADER: &str = "idx,rssi,snr,frequency,height,distance,sf,temperature\n";

    #[test]
    fn header_only_gives_empty_dataset() {
        let f = write_tmp(HEADER);
        let (ds, stats) = load_csv(f.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(ds.n_rows(), 0);
        assert_eq!(stats.rejected(), 0);
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = load_csv("/nonexistent/x.csv", &ColumnMapping::default()).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn missing_header_is_named() {
        let f = write_tmp("rssi,snr,frequency,height,sf\n1,2,3,4,7\n");
        let err = load_csv(f.path(), &ColumnMapping::default()).unwrap_err();
        assert_eq!(err.to_string(), "missing column `distance` in CSV header");
    }

    #[test]
    fn non_numeric_rows_are_rejected_and_counted() {
        let mut body = String::from(HEADER);
        let bad = [2usize, 7];
        for i in 0..10 {
            let rssi = if bad.contains(&i) { "n/a".to_string() } else { format!("-{}", 100 + i) };
            body.push_str(&format!("{i},{rssi},-3.5,868100000,1.5,1200,{},21.5\n", 7 + i % 6));
        }
        let f = write_tmp(&body);

        // independent count: rows whose second field does not parse as a float
        let expected_bad = body
            .lines()
            .skip(1)
            .filter(|l| l.split(',').nth(1).unwrap().parse::<f64>().is_err())
            .count();
        assert_eq!(expected_bad, 2);

        let (ds, stats) = load_csv(f.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(ds.n_rows(), 8);
        assert_eq!(stats.rejected_non_numeric, expected_bad);
        assert_eq!(stats.records, 10);
    }

    #[test]
    fn sf_outside_range_rejected() {
        let body = format!("{HEADER}0,-100,1,868e6,1,10,6,0\n1,-100,1,868e6,1,10,SF9,0\n2,-100,1,868e6,1,10,13,0\n3,-100,1,868e6,1,10,12.0,0\n");
        let f = write_tmp(&body);
        let (ds, stats) = load_csv(f.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(stats.rejected_sf, 2);
        assert_eq!(ds.labels(), [Sf::new(9).unwrap(), Sf::new(12).unwrap()]);
    }

    #[test]
    fn nan_literal_survives_loading() {
        let body = format!("{HEADER}0,NaN,1,868e6,1,10,7,0\n");
        let f = write_tmp(&body);
        let (ds, _) = load_csv(f.path(), &ColumnMapping::default()).unwrap();
        assert_eq!(ds.n_rows(), 1);
        assert!(ds.row(0)[0].is_nan());
    }

    #[test]
    fn custom_mapping() {
        let body = "RSSI (dBm),SNR,Freq,EDheight,dist,SF\n-90,2,868300000,3,500,7\n";
        let f = write_tmp(body);
        let m = ColumnMapping {
            rssi: "RSSI (dBm)".into(),
            snr: "SNR".into(),
            frequency: "Freq".into(),
            distance: "dist".into(),
            height: "EDheight".into(),
            sf: "SF".into(),
        };
        let (ds, _) = load_csv(f.path(), &m).unwrap();
        assert_eq!(ds.row(0), [-90.0, 2.0, 868300000.0, 3.0, 500.0]);
    }

    #[test]
    fn duplicate_mapping_rejected() {
        let mut m = ColumnMapping::default();
        m.snr = m.rssi.clone();
        assert!(matches!(m.validate(), Err(Error::DuplicateMapping(_))));
    }

    #[test]
    fn mapping_json_uses_logical_names() {
        let json = serde_json::to_value(ColumnMapping::default()).unwrap();
        for key in ["rssi_dBm", "snr_dB", "frequency_Hz", "distance_m", "antenna_height_ed_m", "sf_label"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
