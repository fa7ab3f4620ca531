mod common;

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use chainsynth::eval::{evaluate, run_ablation, write_report, Ablate, EvalOptions, PLOTS_DIR, PLOT_HEADER};
use chainsynth::pipeline::{whole_roster, RunConfig};
use chainsynth::prompt::FewShotPool;
use chainsynth::roster::profile_index;
use chainsynth::stats::{jsd_bernoulli, read_diary, Dimension};
use chainsynth::ChainRecord;

fn minutes(hhmm: &str) -> usize {
    let (h, m) = hhmm.split_once(':').unwrap();
    h.parse::<usize>().unwrap() * 60 + m.parse::<usize>().unwrap()
}

/// Histogram counts per dimension straight from a diary CSV.
fn raw_counts(path: &Path) -> BTreeMap<Dimension, Vec<f64>> {
    let mut c: BTreeMap<Dimension, Vec<f64>> = [
        (Dimension::Type, 15),
        (Dimension::Start, 24),
        (Dimension::End, 24),
        (Dimension::Duration, 29),
        (Dimension::Length, 13),
    ]
    .into_iter()
    .map(|(d, n)| (d, vec![0.0; n]))
    .collect();
    let mut lengths: BTreeMap<String, usize> = BTreeMap::new();
    let mut reader = csv::Reader::from_path(path).unwrap();
    for row in reader.records() {
        let row = row.unwrap();
        let (start, end) = (minutes(&row[5]), minutes(&row[6]));
        c.get_mut(&Dimension::Type).unwrap()[row[4].parse::<usize>().unwrap() - 1] += 1.0;
        c.get_mut(&Dimension::Start).unwrap()[(start / 60).min(23)] += 1.0;
        c.get_mut(&Dimension::End).unwrap()[(end / 60).min(23)] += 1.0;
        c.get_mut(&Dimension::Duration).unwrap()[((end - start) / 30).min(28)] += 1.0;
        *lengths.entry(row[1].to_string()).or_default() += 1;
    }
    for n in lengths.values() {
        c.get_mut(&Dimension::Length).unwrap()[n.min(&13) - 1] += 1.0;
    }
    c
}

fn oracle_jsd(a: &[f64], b: &[f64]) -> f64 {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let mut total = 0.0;
    for (x, y) in a.iter().zip(b) {
        let (p, q) = (x / sa, y / sb);
        let m = (p + q) / 2.0;
        if p > 0.0 {
            total += 0.5 * p * (p / m).log2();
        }
        if q > 0.0 {
            total += 0.5 * q * (q / m).log2();
        }
    }
    total
}

fn model_records() -> Vec<ChainRecord> {
    let diary = read_diary(File::open(common::fixtures().join("diaries_model.csv")).unwrap()).unwrap();
    assert!(diary.skipped_rows.is_empty() && diary.skipped_chains.is_empty());
    diary
        .chains
        .iter()
        .map(|o| ChainRecord::from_chain(&o.chain, &o.household_id))
        .collect()
}

#[test]
fn model_diary_against_survey_matches_oracle() {
    let records = model_records();
    let profiles = profile_index(&common::diary_roster());
    let ev = evaluate(&records, &profiles, &common::stats(), &EvalOptions::default()).unwrap();
    let survey = raw_counts(&common::fixtures().join("diaries.csv"));
    let model = raw_counts(&common::fixtures().join("diaries_model.csv"));
    assert_eq!(ev.report.jsd_by_dimension.len(), 5);
    for (dim, got) in &ev.report.jsd_by_dimension {
        let want = oracle_jsd(&survey[dim], &model[dim]);
        assert!(*got > 0.0, "{dim} should differ between survey and model diaries");
        assert!((got - want).abs() <= 1e-12, "{dim}: {got} vs oracle {want}");
    }
}

fn read_panel(path: &Path) -> (String, Vec<(String, f64, f64)>) {
    let text = std::fs::read_to_string(path).unwrap();
    let header = text.lines().next().unwrap().to_string();
    let rows = text
        .lines()
        .skip(1)
        .map(|l| {
            let mut rec = csv::ReaderBuilder::new()
                .has_headers(false)
                .from_reader(l.as_bytes())
                .into_records();
            let r = rec.next().unwrap().unwrap();
            (r[0].to_string(), r[1].parse().unwrap(), r[2].parse().unwrap())
        })
        .collect();
    (header, rows)
}

fn panel_jsd(rows: &[(String, f64, f64)]) -> f64 {
    let r: Vec<f64> = rows.iter().map(|x| x.1).collect();
    let g: Vec<f64> = rows.iter().map(|x| x.2).collect();
    oracle_jsd(&r, &g)
}

#[test]
fn plot_panels_reproduce_every_reported_divergence() {
    let records = model_records();
    let profiles = profile_index(&common::diary_roster());
    let reference = common::stats();
    let options = EvalOptions {
        all_timing_types: true,
        ..EvalOptions::default()
    };
    let ev = evaluate(&records, &profiles, &reference, &options).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(&ev, &reference, dir.path()).unwrap();
    let plots = dir.path().join(PLOTS_DIR);
    let report = &ev.report;

    let mut checked = 0;
    let mut check = |name: &str, want: f64| {
        let (header, rows) = read_panel(&plots.join(format!("{name}.csv")));
        assert_eq!(header, PLOT_HEADER);
        let got = panel_jsd(&rows);
        assert!((got - want).abs() <= 1e-12, "{name}: panel gives {got}, report {want}");
        checked += 1;
        rows
    };
    let length = check("length", report.jsd_by_dimension[&Dimension::Length]);
    assert_eq!(length.len(), 13);
    assert_eq!(length.last().unwrap().0, "13+");
    let start = check("start", report.jsd_by_dimension[&Dimension::Start]);
    assert_eq!(start.len(), 24);
    assert_eq!(start[7].0, "07:00");
    for dim in [Dimension::Type, Dimension::End, Dimension::Duration] {
        check(dim.name(), report.jsd_by_dimension[&dim]);
    }
    for (tag, dims) in &report.slices {
        for (dim, v) in dims {
            check(&format!("{tag}_{dim}"), *v);
        }
    }
    for (t, timing) in &report.per_activity_timing {
        let slug: String = t
            .label()
            .to_ascii_lowercase()
            .replace(['/', ' '], "_");
        check(&format!("timing_{slug}_start"), timing.start);
        check(&format!("timing_{slug}_end"), timing.end);
    }
    drop(check);
    assert!(report.slices.len() == 2 && report.per_activity_timing.len() > 10, "{checked} panels");

    for (pair, per_type) in &report.joint_rate_jsd {
        let slug = pair.label().to_ascii_lowercase().replace(['-', ' '], "_");
        let (header, rows) = read_panel(&plots.join(format!("joint_{slug}.csv")));
        assert_eq!(header, PLOT_HEADER);
        assert_eq!(rows.len(), per_type.len());
        for ((label, a, b), (t, v)) in rows.iter().zip(per_type) {
            assert_eq!(label, t.label());
            assert!((jsd_bernoulli(*a, *b) - v).abs() <= 1e-12, "{slug} {label}");
        }
    }
}

#[test]
fn feedback_leaves_type_mix_alone_for_an_unbiased_model() {
    let households = whole_roster(&common::roster()[..100]);
    let cfg = RunConfig {
        seed: 3,
        ..RunConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let report = run_ablation(
        &cfg,
        Ablate::Feedback,
        &households,
        Arc::new(common::stats()),
        &FewShotPool::builtin(),
        dir.path(),
    )
    .unwrap();
    let with = report.with.report.jsd_by_dimension[&Dimension::Type];
    let without = report.without.report.jsd_by_dimension[&Dimension::Type];
    assert!(with < 0.05 && without < 0.05, "type JSD with {with}, without {without}");
    assert!((with - without).abs() <= 0.02, "type JSD with {with}, without {without}");
    assert!(dir.path().join("with/report.json").exists());
    assert!(dir.path().join("without/plots/length.csv").exists());
}
