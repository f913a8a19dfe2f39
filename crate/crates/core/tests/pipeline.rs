use std::fs;
use std::path::Path;

use proptest::prelude::*;

use sfselect::data::{generate_synthetic, load_csv, write_csv};
use sfselect::features::{enumerate_combinations, FeatureId};
use sfselect::metrics::rank_features;
use sfselect::report::{self, format_pct, TableMode, TABLE_KINDS};
use sfselect::sweep::{run_sweep, SweepPlan, SweepReport};
use sfselect::{ColumnMapping, Dataset, Error, Hyperparams, ModelKind, Sf, SyntheticConfig};

fn canonical_columns() -> Vec<String> {
    FeatureId::ALL.iter().map(|f| f.column_name().to_string()).collect()
}

fn small_synthetic(n: usize, seed: u64) -> Dataset {
    generate_synthetic(&SyntheticConfig {
        n_rows: n,
        seed,
        ..Default::default()
    })
    .unwrap()
}

fn quick_plan(serials: Vec<u8>) -> SweepPlan {
    SweepPlan {
        serials,
        hyperparams: Hyperparams {
            rf_n_estimators: 8,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e12f64..1e12,
        -1.0f64..1.0,
        any::<f64>().prop_filter("finite", |v| v.is_finite()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip_is_bit_exact(
        rows in proptest::collection::vec((proptest::collection::vec(finite(), 5), 7u8..=12), 1..40)
    ) {
        let (values, labels): (Vec<Vec<f64>>, Vec<u8>) = rows.into_iter().unzip();
        let ds = Dataset::new(canonical_columns(), values, labels.iter().map(|&l| Sf::new(l).unwrap()).collect()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_csv(&path, &ds).unwrap();
        let (back, stats) = load_csv(&path, &ColumnMapping::default()).unwrap();
        prop_assert_eq!(stats.rejected(), 0);
        prop_assert_eq!(back.labels(), ds.labels());
        for (a, b) in back.values().iter().zip(ds.values()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
        prop_assert_eq!(back.content_hash(), ds.content_hash());
    }

    #[test]
    fn clean_is_idempotent(
        rows in proptest::collection::vec(
            (proptest::collection::vec(prop_oneof![4 => -100.0f64..100.0, 1 => Just(f64::NAN), 1 => Just(f64::INFINITY)], 5), 7u8..=12),
            1..40,
        )
    ) {
        let (values, labels): (Vec<Vec<f64>>, Vec<u8>) = rows.into_iter().unzip();
        let ds = Dataset::new(canonical_columns(), values, labels.iter().map(|&l| Sf::new(l).unwrap()).collect()).unwrap();
        match ds.clean() {
            Ok((once, stats)) => {
                prop_assert_eq!(stats.input_rows, ds.n_rows());
                prop_assert_eq!(stats.output_rows + stats.dropped(), ds.n_rows());
                prop_assert!(once.is_finite());
                let (twice, stats2) = once.clean().unwrap();
                prop_assert_eq!(&twice, &once);
                prop_assert_eq!(stats2.dropped(), 0);
            }
            Err(e) => prop_assert!(matches!(e, Error::EmptyAfterCleaning)),
        }
    }

    #[test]
    fn ranking_invariant_under_positive_rescaling(
        scales in proptest::collection::vec((0.01f64..100.0, -1e3f64..1e3), 5),
    ) {
        let ds = small_synthetic(400, 3);
        let p = ds.n_cols();
        let values: Vec<f64> = ds
            .values()
            .chunks(p)
            .flat_map(|r| r.iter().zip(&scales).map(|(v, (a, b))| a * v + b).collect::<Vec<_>>())
            .collect();
        let scaled = Dataset::from_flat(ds.columns().to_vec(), values, ds.labels().to_vec()).unwrap();
        let a = rank_features(&ds).unwrap();
        let b = rank_features(&scaled).unwrap();
        for (x, y) in a.features.iter().zip(&b.features) {
            prop_assert_eq!(x.rank, y.rank);
            prop_assert!((x.abs_r - y.abs_r).abs() < 1e-9);
        }
    }
}

#[test]
fn synthetic_ranking_puts_snr_first_by_brute_force() {
    let ds = small_synthetic(3000, 5);
    let cr = rank_features(&ds).unwrap();
    let y: Vec<f64> = ds.labels().iter().map(|l| f64::from(l.value())).collect();
    // textbook two-pass r, recomputed here
    let r = |x: &[f64]| {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        cov / (vx * vy).sqrt()
    };
    let abs: Vec<f64> = (0..5).map(|j| r(&ds.column(j)).abs()).collect();
    for (j, f) in cr.features.iter().enumerate() {
        assert!((f.abs_r - abs[j]).abs() < 1e-12);
    }
    let best = (0..5).max_by(|&a, &b| abs[a].total_cmp(&abs[b])).unwrap();
    assert_eq!(FeatureId::ALL[best], FeatureId::Snr);
    assert_eq!(cr.rank_of(FeatureId::Snr), Some(1));
}

#[test]
fn snr_serials_beat_frequency_for_every_kind() {
    let ds = small_synthetic(2500, 11);
    for standardize in [false, true] {
        let mut plan = quick_plan(vec![2, 3, 6, 31]);
        plan.hyperparams.standardize = standardize;
        let report = run_sweep(&ds, &plan).unwrap();
        for kind in ModelKind::ALL {
            let base = report.result(3, kind).unwrap().accuracy;
            for s in [2, 6, 31] {
                let acc = report.result(s, kind).unwrap().accuracy;
                assert!(acc > base, "{kind} (standardize {standardize}): serial {s} {acc} vs Frequency {base}");
            }
        }
    }
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn report_rendering_and_persistence() {
    let ds = small_synthetic(900, 2);
    let report = run_sweep(&ds, &quick_plan(vec![1, 6, 7, 16])).unwrap();

    // JSON round trip
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    report.write_json(&json).unwrap();
    let back = SweepReport::read_json(&json).unwrap();
    assert_eq!(back, report);

    // strict mode needs all 124 runs
    let err = report::emit_tables(&report, dir.path(), TableMode::Strict).unwrap_err();
    assert!(matches!(err, Error::IncompleteSweep(n) if n == 124 - 16));

    // partial rendering is byte-stable
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    report::emit_all(&report, a.path(), TableMode::Partial).unwrap();
    report::emit_all(&back, b.path(), TableMode::Partial).unwrap();
    let (ta, tb) = (read_tree(a.path()), read_tree(b.path()));
    assert_eq!(ta, tb);
    let names: Vec<&str> = ta.iter().map(|(n, _)| n.as_str()).collect();
    for expected in [
        "tables/singles.md",
        "tables/pairs.csv",
        "figures/fig2.csv",
        "figures/fig2.svg",
        "figures/fig3.csv",
        "figures/fig3.svg",
        "ranking.csv",
        "metadata.json",
    ] {
        assert!(names.contains(&expected), "{expected} missing from {names:?}");
    }

    // figure series always spans the catalog
    let fig = fs::read_to_string(a.path().join("figures/fig2.csv")).unwrap();
    assert_eq!(fig.lines().count(), 1 + enumerate_combinations().len());

    // printed cells are the stored values, rounded once
    let pairs = fs::read_to_string(a.path().join("tables/pairs.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(pairs.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        let serial: u8 = row[0].parse().unwrap();
        for (i, kind) in TABLE_KINDS.iter().enumerate() {
            let r = report.result(serial, *kind).unwrap();
            assert_eq!(&row[2 + 2 * i], format_pct(r.accuracy));
            assert_eq!(&row[3 + 2 * i], format_pct(r.weighted_f1));
        }
        let avg = report.average(serial).unwrap();
        assert_eq!(&row[10], format_pct(avg.accuracy));
    }
    let best: Vec<&str> = rows.iter().map(|r| &r[12]).collect();
    assert_eq!(best.iter().filter(|b| **b == "true").count(), 1);

    // ranking file
    let ranking = fs::read_to_string(a.path().join("ranking.csv")).unwrap();
    let ranks: Vec<String> = ranking.lines().skip(1).map(|l| l.split(',').nth(3).unwrap().to_string()).collect();
    assert_eq!(ranks, ["1", "2", "3", "4", "5"]);
}

#[test]
fn best_pair_row_is_marked_in_markdown() {
    let ds = small_synthetic(900, 4);
    let report = run_sweep(&ds, &quick_plan(vec![6, 11])).unwrap();
    let tables = report::build_tables(&report, TableMode::Partial).unwrap();
    let pairs = tables.iter().find(|t| t.name == "pairs").unwrap();
    let six = pairs.rows.iter().find(|r| r.serial == 6).unwrap();
    let eleven = pairs.rows.iter().find(|r| r.serial == 11).unwrap();
    let six_best = six.average.as_ref().unwrap().accuracy >= eleven.average.as_ref().unwrap().accuracy;
    assert_eq!(six.best, six_best);
    assert_ne!(six.best, eleven.best);
    let md = report::table_markdown(pairs);
    let marked = if six.best { "**RSSI+SNR**".to_string() } else { format!("**{}**", eleven.label) };
    assert!(md.contains(&marked), "{md}");
}

#[test]
fn sweep_uses_one_partition_and_exact_averages() {
    let ds = small_synthetic(800, 8);
    let report = run_sweep(&ds, &quick_plan(vec![4, 5, 30])).unwrap();
    assert_eq!(report.results.len(), 12);
    let h = &report.metadata.partition_hash;
    assert!(report.results.iter().all(|r| &r.partition_hash == h));
    assert!(report.metadata.shared_split);
    for a in &report.averages {
        let mean = ModelKind::ALL
            .iter()
            .map(|&k| report.result(a.serial, k).unwrap().accuracy)
            .sum::<f64>()
            / 4.0;
        assert!((a.accuracy - mean).abs() <= 1e-12);
        assert_eq!(a.n_kinds, 4);
    }
    assert_eq!(report.metadata.n_train + report.metadata.n_test, 800);
    assert_eq!(report.metadata.n_train, 640);
}

#[test]
fn per_run_seeds_do_not_depend_on_plan_membership() {
    let ds = small_synthetic(700, 9);
    let alone = run_sweep(&ds, &quick_plan(vec![31])).unwrap();
    let together = run_sweep(&ds, &quick_plan(vec![6, 31])).unwrap();
    for kind in ModelKind::ALL {
        let (a, b) = (alone.result(31, kind).unwrap(), together.result(31, kind).unwrap());
        assert_eq!(a.accuracy, b.accuracy, "{kind}");
        assert_eq!(a.confusion, b.confusion);
    }
}

#[test]
fn sweep_requires_all_five_features() {
    let ds = small_synthetic(100, 1);
    let fs = sfselect::FeatureSet::from_serial(6).unwrap();
    let two = ds.select_features(&fs).unwrap();
    assert!(matches!(run_sweep(&two, &quick_plan(vec![6])), Err(Error::FeatureAbsent(_))));
}
