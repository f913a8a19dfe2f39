//! Rendering of a [`SweepReport`] into tables, figure series and the feature
//! ranking.
//!
//! Output layout under the chosen directory:
//!
//! ```text
//! tables/{singles,pairs,triples,quads,full}.{md,csv}
//! figures/fig2.csv  figures/fig2.svg  figures/fig3.csv  figures/fig3.svg
//! ranking.csv
//! metadata.json
//! ```
//!
//! Percentages are printed with two decimals, rounded half-up. Rendering is a
//! pure function of the report, so re-rendering gives identical bytes.

mod svg;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::enumerate_combinations;
use crate::metrics::CorrelationReport;
use crate::models::ModelKind;
use crate::sweep::SweepReport;

/// Column order of the printed tables.
pub const TABLE_KINDS: [ModelKind; 4] = [ModelKind::Knn, ModelKind::Mlr, ModelKind::Dtc, ModelKind::Rf];

/// Format a fraction in `[0, 1]` as a percentage with two decimals, rounding
/// half away from zero.
///
/// The value is first printed with nine decimals so that binary noise such as
/// `65.72499999999999` does not decide the rounding direction.
pub fn format_pct(fraction: f64) -> String {
    if !fraction.is_finite() {
        return "-".to_string();
    }
    let s = format!("{:.9}", fraction * 100.0);
    let negative = s.starts_with('-');
    let digits: String = s.chars().filter(|c| c.is_ascii_digit()).collect();
    let nanos: u128 = digits.parse().unwrap_or(0);
    let cents = (nanos + 5_000_000) / 10_000_000;
    let sign = if negative && cents != 0 { "-" } else { "" };
    format!("{sign}{}.{:02}", cents / 100, cents % 100)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// Every serial of every table must have all four kinds.
    Strict,
    /// Emit whatever is available; missing cells print as `-`.
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub accuracy: f64,
    pub weighted_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub serial: u8,
    pub label: String,
    /// In [`TABLE_KINDS`] order.
    pub cells: Vec<Option<Cell>>,
    pub average: Option<Cell>,
    /// Highest average accuracy within its table.
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: &'static str,
    pub title: &'static str,
    pub subset_size: usize,
    pub rows: Vec<TableRow>,
}

const TABLE_SPECS: [(&str, &str, usize); 5] = [
    ("singles", "Single features", 1),
    ("pairs", "Two-feature combinations", 2),
    ("triples", "Three-feature combinations", 3),
    ("quads", "Four-feature combinations", 4),
    ("full", "Five-feature combination", 5),
];

/// Build the five tables. In strict mode any missing run is an error.
pub fn build_tables(report: &SweepReport, mode: TableMode) -> Result<Vec<Table>> {
    let catalog = enumerate_combinations();
    if mode == TableMode::Strict {
        let missing = catalog
            .iter()
            .flat_map(|fs| TABLE_KINDS.iter().map(move |&k| (fs.serial(), k)))
            .filter(|&(s, k)| report.result(s, k).is_none())
            .count();
        if missing > 0 {
            return Err(Error::IncompleteSweep(missing));
        }
    }
    let tables = TABLE_SPECS
        .iter()
        .map(|&(name, title, size)| {
            let mut rows: Vec<TableRow> = catalog
                .of_size(size)
                .filter(|fs| mode == TableMode::Strict || report.results.iter().any(|r| r.serial == fs.serial()))
                .map(|fs| {
                    let s = fs.serial();
                    TableRow {
                        serial: s,
                        label: fs.label().to_string(),
                        cells: TABLE_KINDS
                            .iter()
                            .map(|&k| {
                                report.result(s, k).map(|r| Cell {
                                    accuracy: r.accuracy,
                                    weighted_f1: r.weighted_f1,
                                })
                            })
                            .collect(),
                        average: report.average(s).map(|a| Cell {
                            accuracy: a.accuracy,
                            weighted_f1: a.weighted_f1,
                        }),
                        best: false,
                    }
                })
                .collect();
            let best = rows
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.average.as_ref().map(|a| (i, a.accuracy)))
                .fold(None::<(usize, f64)>, |acc, (i, v)| match acc {
                    Some((_, bv)) if bv >= v => acc,
                    _ => Some((i, v)),
                });
            if rows.len() > 1 {
                if let Some((i, _)) = best {
                    rows[i].best = true;
                }
            }
            Table {
                name,
                title,
                subset_size: size,
                rows,
            }
        })
        .collect();
    Ok(tables)
}

fn pct_or_dash(v: Option<f64>) -> String {
    v.map(format_pct).unwrap_or_else(|| "-".to_string())
}

fn row_values(row: &TableRow) -> Vec<String> {
    let mut out = Vec::with_capacity(10);
    for c in row.cells.iter().chain(std::iter::once(&row.average)) {
        out.push(pct_or_dash(c.as_ref().map(|c| c.accuracy)));
        out.push(pct_or_dash(c.as_ref().map(|c| c.weighted_f1)));
    }
    out
}

/// Markdown rendering. The best row is bolded.
pub fn table_markdown(t: &Table) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### {}\n", t.title);
    s.push_str("| No. | Features |");
    for k in TABLE_KINDS {
        let _ = write!(s, " {k} Acc % | {k} F1 |");
    }
    s.push_str(" Average Acc % | Average F1 |\n");
    s.push_str("|---:|:---|");
    s.push_str(&"---:|".repeat(10));
    s.push('\n');
    for row in &t.rows {
        let bold = |v: &str| if row.best { format!("**{v}**") } else { v.to_string() };
        let _ = write!(s, "| {} | {} |", row.serial, bold(&row.label));
        for v in row_values(row) {
            let _ = write!(s, " {} |", bold(&v));
        }
        s.push('\n');
    }
    s
}

/// CSV rendering with the same numbers as the markdown table plus a `best`
/// column.
pub fn table_csv(t: &Table) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["serial".to_string(), "features".to_string()];
    for k in TABLE_KINDS {
        header.push(format!("{}_acc_pct", k.id()));
        header.push(format!("{}_f1_pct", k.id()));
    }
    header.extend(["avg_acc_pct".to_string(), "avg_f1_pct".to_string(), "best".to_string()]);
    w.write_record(&header)?;
    for row in &t.rows {
        let mut rec = vec![row.serial.to_string(), row.label.clone()];
        rec.extend(row_values(row));
        rec.push(row.best.to_string());
        w.write_record(&rec)?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("<buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigurePoint {
    pub serial: u8,
    pub label: String,
    pub avg_accuracy: Option<f64>,
    pub avg_weighted_f1: Option<f64>,
}

/// One point per catalog serial, in serial order; serials without a complete
/// average carry `None`.
pub fn figure_series(report: &SweepReport) -> Vec<FigurePoint> {
    enumerate_combinations()
        .iter()
        .map(|fs| {
            let a = report.average(fs.serial());
            FigurePoint {
                serial: fs.serial(),
                label: fs.label().to_string(),
                avg_accuracy: a.map(|a| a.accuracy),
                avg_weighted_f1: a.map(|a| a.weighted_f1),
            }
        })
        .collect()
}

pub fn figure_csv(points: &[FigurePoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["serial", "features", "avg_acc_pct", "avg_f1_pct"])?;
    for p in points {
        w.write_record([
            p.serial.to_string(),
            p.label.clone(),
            p.avg_accuracy.map(format_pct).unwrap_or_default(),
            p.avg_weighted_f1.map(format_pct).unwrap_or_default(),
        ])?;
    }
    into_string(w)
}

/// `feature, r, abs_r, rank` in rank order.
pub fn ranking_csv(cr: &CorrelationReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["feature", "r", "abs_r", "rank", "degenerate"])?;
    for f in cr.ranked() {
        w.write_record([
            f.feature.label().to_string(),
            format!("{:.6}", f.r),
            format!("{:.6}", f.abs_r),
            f.rank.to_string(),
            f.degenerate.to_string(),
        ])?;
    }
    into_string(w)
}

/// Everything the report directory contains, held in memory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub tables: Vec<Table>,
    pub figure: Vec<FigurePoint>,
    pub ranking: CorrelationReport,
    pub metadata: serde_json::Value,
}

impl ReportBundle {
    pub fn from_report(report: &SweepReport, mode: TableMode) -> Result<Self> {
        let mut metadata = serde_json::to_value(&report.metadata)?;
        if let serde_json::Value::Object(m) = &mut metadata {
            m.insert("complete".into(), report.is_complete().into());
            m.insert("n_results".into(), report.results.len().into());
            m.insert("n_failures".into(), report.failures.len().into());
        }
        Ok(ReportBundle {
            tables: build_tables(report, mode)?,
            figure: figure_series(report),
            ranking: report.correlation.clone(),
            metadata,
        })
    }

    /// Write every file under `dir`; returns the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for t in &self.tables {
            written.push(write_file(&dir.join("tables").join(format!("{}.md", t.name)), &table_markdown(t))?);
            written.push(write_file(&dir.join("tables").join(format!("{}.csv", t.name)), &table_csv(t)?)?);
        }
        written.extend(write_figure(dir, &self.figure)?);
        written.extend(write_ranking(dir, &self.ranking)?);
        let meta = serde_json::to_string_pretty(&self.metadata)? + "\n";
        written.push(write_file(&dir.join("metadata.json"), &meta)?);
        Ok(written)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn write_figure(dir: &Path, points: &[FigurePoint]) -> Result<Vec<PathBuf>> {
    let figs = dir.join("figures");
    Ok(vec![
        write_file(&figs.join("fig2.csv"), &figure_csv(points)?)?,
        write_file(&figs.join("fig2.svg"), &svg::averages_chart(points))?,
    ])
}

fn write_ranking(dir: &Path, cr: &CorrelationReport) -> Result<Vec<PathBuf>> {
    let csv = ranking_csv(cr)?;
    Ok(vec![
        write_file(&dir.join("ranking.csv"), &csv)?,
        write_file(&dir.join("figures").join("fig3.csv"), &csv)?,
        write_file(&dir.join("figures").join("fig3.svg"), &svg::ranking_chart(cr))?,
    ])
}

pub fn emit_tables(report: &SweepReport, dir: &Path, mode: TableMode) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for t in build_tables(report, mode)? {
        written.push(write_file(&dir.join("tables").join(format!("{}.md", t.name)), &table_markdown(&t))?);
        written.push(write_file(&dir.join("tables").join(format!("{}.csv", t.name)), &table_csv(&t)?)?);
    }
    Ok(written)
}

pub fn emit_figure_data(report: &SweepReport, dir: &Path) -> Result<Vec<PathBuf>> {
    write_figure(dir, &figure_series(report))
}

pub fn emit_ranking(cr: &CorrelationReport, dir: &Path) -> Result<Vec<PathBuf>> {
    write_ranking(dir, cr)
}

/// Tables, figures, ranking and metadata in one go.
pub fn emit_all(report: &SweepReport, dir: &Path, mode: TableMode) -> Result<Vec<PathBuf>> {
    ReportBundle::from_report(report, mode)?.write(dir)
}
