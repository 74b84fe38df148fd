use std::path::Path;
use std::process::{Command, Output};

use pirum::io;

const PEAKED_PAIR: &str = "12:0.3333333333333333,9:0.3333333333333333,4:0.3333333333333334|10:0.6666666666666666,4:0.3333333333333334";

fn pirum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pirum")).args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn order_check_reports_crossing_and_peak() {
    let o = pirum(&["order-check", "--pair", PEAKED_PAIR, "--id", "peaked"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = io::read_verdicts(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert_eq!(r.pair_id, "peaked");
    assert!(!r.pi_ordered && r.omega_ordered);
    assert_eq!(r.crossings.len(), 1);
    assert!((r.crossings[0] - 4.90993).abs() < 0.01);
    assert!((r.peak_theta.unwrap() - 5.99287).abs() < 0.01);
    assert!(stderr(&o).contains("# effective configuration"));
}

#[test]
fn every_battery_pair_is_ordered() {
    let o = pirum(&["order-check", "--battery-pairs"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = io::read_verdicts(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 40);
    assert!(rows.iter().all(|r| r.pi_ordered));
}

#[test]
fn battery_output_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "battery.csv");
    let o = pirum(&["battery", "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("36 finite thresholds"), "{}", stderr(&o));
    let b = io::load_battery(Path::new(&out), pirum_core::UtilityFamily::Crra, &Default::default()).unwrap();
    assert_eq!(b.len(), 40);
    // a battery file is accepted back as input
    let o = pirum(&["battery", "--battery", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn premium_curve_columns() {
    let o = pirum(&["premium-curve", "--battery-pair", "b4q5", "--grid-start", "0", "--grid-stop", "1", "--grid-step", "0.5", "--with-ce", "--with-coneu"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = io::read_curve(o.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.ce_diff.is_some() && r.coneu_diff.is_some()));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let (choices, truth, fit) = (path(dir.path(), "c.csv"), path(dir.path(), "t.csv"), path(dir.path(), "f.csv"));
    let o = pirum(&[
        "simulate", "--model", "model=pi;lambda=0.01;kappa=0.02", "--theta-range", "0,1", "--n-subjects", "30",
        "--question-set", "mixed", "--seed", "4", "--out", &choices, "--truth", &truth,
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(io::read_truth(std::fs::File::open(&truth).unwrap()).unwrap().len(), 30);
    let o = pirum(&["estimate", "--choices", &choices, "--model", "pi", "--scheme", "pooled", "--out", &fit]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = io::read_fit(std::fs::File::open(&fit).unwrap()).unwrap();
    assert_eq!(rows.len(), 1);
    let theta = rows[0].params.theta;
    assert!((0.0..1.0).contains(&theta), "{theta}");
    // same seed, same file
    let again = path(dir.path(), "c2.csv");
    pirum(&["simulate", "--model", "model=pi;lambda=0.01;kappa=0.02", "--theta-range", "0,1", "--n-subjects", "30",
        "--question-set", "mixed", "--seed", "4", "--out", &again]);
    assert_eq!(std::fs::read(&choices).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "run.cfg");
    std::fs::write(&cfg, format!("pair = {PEAKED_PAIR}\nfamily = cara\n")).unwrap();
    let o = pirum(&["--config", &cfg, "order-check"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = io::read_verdicts(o.stdout.as_slice()).unwrap();
    assert!((rows[0].crossings[0] - 0.48121).abs() < 0.01);
    assert!(stderr(&o).contains("family = cara (config)"));
    std::fs::write(&cfg, "typo = 1\n").unwrap();
    assert_eq!(pirum(&["--config", &cfg, "battery"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(pirum(&[]).status.code(), Some(2));
    assert_eq!(pirum(&["estimate", "--model", "pi"]).status.code(), Some(2));
    assert_eq!(pirum(&["order-check", "--pair", "1:0.5|2:1"]).status.code(), Some(2));
    assert_eq!(pirum(&["bootstrap", "--choices", "x", "--model", "pi", "--scheme", "hetero"]).status.code(), Some(2));
    assert_eq!(pirum(&["--version"]).status.code(), Some(0));
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "subject_id,block,question,response\n1,1,1,Q\n").unwrap();
    let o = pirum(&["estimate", "--choices", &bad, "--model", "pi"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.csv:2:"), "{}", stderr(&o));
}

#[test]
fn bootstrap_and_model_compare() {
    let dir = tempfile::tempdir().unwrap();
    let (choices, summary, table) = (path(dir.path(), "c.csv"), path(dir.path(), "s.csv"), path(dir.path(), "m.csv"));
    let o = pirum(&["simulate", "--model", "model=pi;theta=0.5;lambda=0.01;kappa=0.02", "--n-subjects", "12", "--seed", "9", "--out", &choices]);
    assert!(o.status.success(), "{}", stderr(&o));
    let small = ["--population", "12", "--generations", "10"];
    for _ in 0..2 {
        let mut args = vec!["bootstrap", "--choices", &choices, "--model", "pi", "--reps", "4", "--out", &summary, "--append"];
        args.extend(small);
        let o = pirum(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let rows = io::read_summary(std::fs::File::open(&summary).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].se_lambda.unwrap() >= 0.0 && rows[0].gamma.is_some());

    let mut args = vec!["model-compare", "--choices", &choices, "--models", "pi,ce", "--out", &table];
    args.extend(small);
    let o = pirum(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "model,best_count");
    let total: usize = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 12);
    assert_eq!(std::fs::read_to_string(&table).unwrap().lines().count(), 13);
}
