use std::io::Write;

use circdeconv::harness::experiment::mean_se;
use circdeconv::harness::ingest::ingest_reader;
use circdeconv::harness::report::{ReportRows, RISK_COLUMNS, TEST_COLUMNS};
use circdeconv::harness::{
    emit_report, ingest_circular_data, run_risk_experiment, run_test_experiment, ExperimentConfig, ExperimentReport, KRule,
    NoiseSpec, RecordFormat, ReportFormat, Scenario, SmoothnessSpec,
};
use circdeconv::Error;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn canonical(v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.to_string()).to_string());
                out.push(':');
                canonical(&map[k.as_str()], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                canonical(item, out);
            }
            out.push(']');
        }
        other => out.push_str(&other.to_string()),
    }
}

fn rehash(cfg: &ExperimentConfig) -> String {
    let mut v: Value = serde_json::from_str(&cfg.to_json().unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("threads");
    obj.remove("output");
    let mut s = String::new();
    canonical(&v, &mut s);
    Sha256::digest(s.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn risk_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        SmoothnessSpec::Ordinary { s: 1.0, radius: 1.0, scale: 1.0 },
        NoiseSpec::Mild { p: 1.0, max_freq: Some(16), scale: None, sup_norm: None },
        vec![50, 100, 200],
    );
    cfg.replications = Some(100);
    cfg.seed = 71;
    cfg
}

fn test_config() -> ExperimentConfig {
    let mut cfg = risk_config();
    cfg.k_rule = KRule::Fixed(2);
    cfg.a_ladder = vec![0.1, 1.0, 5.0, 50.0];
    cfg
}

#[test]
fn config_hash_matches_independent_rehash() {
    let mut cfg = test_config();
    assert_eq!(cfg.config_hash().unwrap(), rehash(&cfg));
    let h = cfg.config_hash().unwrap();
    cfg.threads = Some(3);
    cfg.output = Some("x.json".into());
    assert_eq!(cfg.config_hash().unwrap(), h);
    cfg.seed += 1;
    assert_ne!(cfg.config_hash().unwrap(), h);
    let report = run_test_experiment(&test_config()).unwrap();
    assert_eq!(report.metadata.config_hash, rehash(&test_config()));
}

#[test]
fn config_json_roundtrip() {
    let cfg = test_config();
    let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
    assert_eq!(back, cfg);
    let minimal = r#"{"smoothness":{"kind":"ordinary","s":2},"noise":{"kind":"direct"},"n_grid":[10]}"#;
    let cfg = ExperimentConfig::from_json(minimal).unwrap();
    assert_eq!(cfg.alpha, 0.05);
    assert_eq!(cfg.k_rule, KRule::KappaStar);
}

#[test]
fn config_validation() {
    let mut cfg = risk_config();
    cfg.replications = Some(0);
    assert!(cfg.validate().is_err());
    let mut cfg = risk_config();
    cfg.n_grid = vec![1];
    assert!(matches!(cfg.validate(), Err(Error::SampleTooSmall { .. })));
    let mut cfg = risk_config();
    cfg.k_rule = KRule::Fixed(0);
    assert!(cfg.validate().is_err());
}

#[test]
fn report_json_roundtrip_is_identity() {
    for report in [run_risk_experiment(&risk_config()).unwrap(), run_test_experiment(&test_config()).unwrap()] {
        let json = report.to_json().unwrap();
        let back = ExperimentReport::from_json(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_json().unwrap(), json);
    }
}

#[test]
fn test_csv_has_one_row_per_cell() {
    let cfg = test_config();
    let report = run_test_experiment(&cfg).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), TEST_COLUMNS);
    assert_eq!(lines.count(), cfg.n_grid.len() * 3 * cfg.a_ladder.len());
    let mut buf = Vec::new();
    emit_report(&report, ReportFormat::Csv, &mut buf).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), csv);
}

#[test]
fn risk_csv_header_and_rows() {
    let report = run_risk_experiment(&risk_config()).unwrap();
    let csv = report.to_csv();
    assert_eq!(csv.lines().next().unwrap(), RISK_COLUMNS);
    let ReportRows::Risk(rows) = &report.rows else { panic!("wrong kind") };
    assert_eq!(csv.lines().count(), rows.len() + 1);
    let cols = RISK_COLUMNS.split(',').count();
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() >= cols));
    assert!(report.metadata.label.contains("lower proxy"));
    for s in &report.summary {
        let worst = rows.iter().filter(|r| r.n == s.n).filter_map(|r| r.risk).fold(f64::MIN, f64::max);
        assert_eq!(s.value, Some(worst));
    }
}

#[test]
fn standard_errors_are_sample_sd_over_root_reps() {
    let values = [1.0, 2.0, 4.0, 7.0];
    let m = mean_se(&values);
    let mean = 3.5;
    let sd = ((2.5f64.powi(2) + 1.5f64.powi(2) + 0.5f64.powi(2) + 3.5f64.powi(2)) / 3.0).sqrt();
    assert!((m.mean - mean).abs() < 1e-15);
    assert!((m.se - sd / 2.0).abs() < 1e-12);

    // Bernoulli columns: se = sqrt(p(1-p) / (reps - 1))
    let cfg = test_config();
    let report = run_test_experiment(&cfg).unwrap();
    let ReportRows::Test(rows) = &report.rows else { panic!("wrong kind") };
    let reps = cfg.replications.unwrap() as f64;
    for r in rows.iter().filter(|r| r.rejection_rate.is_some()) {
        let p = r.rejection_rate.unwrap();
        let expect = (p * (1.0 - p) / (reps - 1.0)).sqrt();
        assert!((r.rejection_se.unwrap() - expect).abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn null_risk_without_noise_matches_exact_variance() {
    let mut cfg = ExperimentConfig::new(
        SmoothnessSpec::Ordinary { s: 1.0, radius: 1.0, scale: 1.0 },
        NoiseSpec::Direct { sup_norm: None },
        vec![100],
    );
    cfg.k_rule = KRule::Fixed(1);
    cfg.scenarios = Some(vec![Scenario::Null]);
    cfg.replications = Some(100_000);
    cfg.seed = 72;
    let report = run_risk_experiment(&cfg).unwrap();
    let ReportRows::Risk(rows) = &report.rows else { panic!("wrong kind") };
    let row = &rows[0];
    let exact = 4.0 / (100.0 * 99.0);
    assert!((row.exact_risk.unwrap() - exact).abs() < 1e-15);
    let (risk, se) = (row.risk.unwrap(), row.risk_se.unwrap());
    assert!((risk - exact).abs() <= 3.0 * se, "{risk} vs {exact} (se {se})");
}

#[test]
fn single_replication_is_reproducible() {
    let mut cfg = risk_config();
    cfg.replications = Some(1);
    let a = run_risk_experiment(&cfg).unwrap().to_json().unwrap();
    let b = run_risk_experiment(&cfg).unwrap().to_json().unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    assert_ne!(run_risk_experiment(&cfg).unwrap().to_json().unwrap(), a);
}

#[test]
fn experiments_reject_unsimulatable_noise_and_wrong_scenarios() {
    let mut cfg = risk_config();
    cfg.noise = NoiseSpec::Mild { p: 1.0, max_freq: None, scale: None, sup_norm: None };
    assert!(matches!(run_risk_experiment(&cfg), Err(Error::NotSimulatable)));
    let mut cfg = risk_config();
    cfg.scenarios = Some(vec![Scenario::Spike]);
    assert!(run_risk_experiment(&cfg).is_err());
}

#[test]
fn ingest_maps_formats_and_reports_line_numbers() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    writeln!(file, "time\n12:00\n23:59\n\n# comment\n00:00\n6:30").unwrap();
    let got = ingest_circular_data(file.path(), RecordFormat::Hhmm).unwrap();
    assert_eq!(got.sample.values(), &[0.5, 1439.0 / 1440.0, 0.0, 390.0 / 1440.0]);
    assert!(got.rejected.is_empty());

    let degrees = ingest_reader("90\n180,extra\n".as_bytes(), RecordFormat::Degrees, "mem").unwrap();
    assert_eq!(degrees.sample.values(), &[0.25, 0.5]);

    let mut lines: Vec<String> = (0..200).map(|i| format!("{}", i as f64 / 200.0)).collect();
    lines.push("1.5".into());
    let ok = ingest_reader(lines.join("\n").as_bytes(), RecordFormat::Unit, "mem").unwrap();
    assert_eq!(ok.rejected.len(), 1);
    assert_eq!(ok.rejected[0].0, 201);
    lines.push("nope".into());
    lines.push("-0.1".into());
    match ingest_reader(lines.join("\n").as_bytes(), RecordFormat::Unit, "mem") {
        Err(Error::Ingest { failed, total, details }) => {
            assert_eq!((failed, total), (3, 203));
            assert!(details.contains("line 201"));
        }
        other => panic!("expected ingest failure, got {other:?}"),
    }
}
