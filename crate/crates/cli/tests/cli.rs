use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hazlingam::report::RunReport;
use hazlingam::stages::StageTiming;

const FAST: &str = "[sampler]\nn_draws = 100\nn_tune = 150\nn_chains = 2\n[lingam]\nn_bootstrap = 20\n";

fn hazlingam(out: &Path, config: Option<&Path>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hazlingam"));
    cmd.arg("--out").arg(out).env("RUST_LOG", "warn");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn read_report(out: &Path) -> RunReport {
    serde_json::from_slice(&fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn synth_writes_three_files_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    assert_eq!(code(&hazlingam(&a, None, &["--seed", "5", "synth"])), 0);
    assert_eq!(code(&hazlingam(&b, None, &["synth", "--seed", "5"])), 0);
    assert_eq!(code(&hazlingam(&c, None, &["synth", "--seed", "6"])), 0);
    let mut names: Vec<_> = fs::read_dir(a.join("synth")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["ground_truth.json", "inspections.csv", "timeseries.csv"]);
    for f in ["ground_truth.json", "inspections.csv", "timeseries.csv"] {
        assert_eq!(fs::read(a.join("synth").join(f)).unwrap(), fs::read(b.join("synth").join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("synth/inspections.csv")).unwrap(), fs::read(c.join("synth/inspections.csv")).unwrap());
}

#[test]
fn zero_pumps_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[synth]\nn_pumps = 0\n");
    let o = hazlingam(&tmp.path().join("out"), Some(&cfg), &["synth"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("n_pumps"));
}

#[test]
fn unknown_config_key_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "[sampler]\nn_draw = 10\n");
    assert_eq!(code(&hazlingam(&tmp.path().join("out"), Some(&cfg), &["synth"])), 1);
}

#[test]
fn missing_timeseries_is_reported_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&hazlingam(&out, None, &["synth"])), 0);
    fs::remove_file(out.join("synth/timeseries.csv")).unwrap();
    let o = hazlingam(&out, None, &["fit"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("fit:") && err.contains("timeseries.csv"), "{err}");

    let cfg =
        write_config(tmp.path(), "[data]\ninspections = \"/nonexistent/i.csv\"\ntimeseries = \"/nonexistent/t.csv\"\n");
    assert_eq!(code(&hazlingam(&out, Some(&cfg), &["fit"])), 1);
}

#[test]
fn malformed_input_is_a_stage_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    assert_eq!(code(&hazlingam(&out, None, &["synth"])), 0);
    fs::write(out.join("synth/inspections.csv"), "pump_id,day,state\nP001,0,1\nP001,90,9\n").unwrap();
    let o = hazlingam(&out, None, &["fit"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fit stage failed"));
}

#[test]
fn fit_is_reproducible_and_flags_short_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&hazlingam(out, Some(&cfg), &["synth"])), 0);
        // 200 draws cannot reach the ESS threshold, so the run is flagged
        assert_eq!(code(&hazlingam(out, Some(&cfg), &["fit"])), 3);
    }
    for f in ["u_estimates.csv", "draws.csv", "diagnostics.json", "transitions.csv"] {
        assert_eq!(fs::read(a.join("fit").join(f)).unwrap(), fs::read(b.join("fit").join(f)).unwrap(), "{f}");
    }
    let header = fs::read_to_string(a.join("fit/u_estimates.csv")).unwrap();
    assert!(header.starts_with("pump_id,u_mean,hdi_low,hdi_high\n"));
}

#[test]
fn threads_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, t) in [(&a, "1"), (&b, "3")] {
        hazlingam(out, Some(&cfg), &["--threads", t, "synth"]);
        hazlingam(out, Some(&cfg), &["--threads", t, "fit"]);
    }
    assert_eq!(fs::read(a.join("fit/draws.csv")).unwrap(), fs::read(b.join("fit/draws.csv")).unwrap());
}

fn timings(out: &Path) -> Vec<StageTiming> {
    serde_json::from_slice(&fs::read(out.join("timings.json")).unwrap()).unwrap()
}

fn cached(out: &Path, stage: &str) -> bool {
    timings(out).iter().find(|t| t.stage == stage).unwrap().cached
}

#[test]
fn pipeline_cache_skips_and_recovers_from_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let out = tmp.path().join("out");
    assert_eq!(code(&hazlingam(&out, Some(&cfg), &["pipeline"])), 3);
    assert!(!cached(&out, "fit"));
    let first = fs::read(out.join("report.json")).unwrap();

    hazlingam(&out, Some(&cfg), &["pipeline"]);
    assert!(cached(&out, "fit") && cached(&out, "discover"));
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first);

    fs::write(out.join("fit/u_estimates.csv"), "garbage").unwrap();
    hazlingam(&out, Some(&cfg), &["pipeline"]);
    assert!(!cached(&out, "fit"));
    assert!(cached(&out, "synth"));
    assert_eq!(fs::read(out.join("report.json")).unwrap(), first);

    fs::write(out.join("fit/manifest.json"), "{").unwrap();
    hazlingam(&out, Some(&cfg), &["pipeline"]);
    assert!(!cached(&out, "fit"));

    // a changed setting invalidates the stage and everything downstream of changed files
    let cfg2 = write_config(tmp.path(), &format!("{FAST}[run]\nhdi_mass = 0.9\n"));
    hazlingam(&out, Some(&cfg2), &["pipeline"]);
    assert!(!cached(&out, "fit") && cached(&out, "features"));
    assert!(!cached(&out, "group"));

    // the 30-pump default cannot support 22-feature discovery in either group
    let r = read_report(&out);
    assert!(r.discovery.iter().all(|g| !g.ran && g.skip_reason.is_some()));
    assert!(r.gap_ratio.is_none());
    assert_eq!(r.n_pumps, 30);
}

#[test]
fn report_reads_back_the_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), FAST);
    let out = tmp.path().join("out");
    hazlingam(&out, Some(&cfg), &["pipeline"]);
    let before = fs::read(out.join("report.json")).unwrap();
    fs::remove_file(out.join("report.json")).unwrap();
    assert_eq!(code(&hazlingam(&out, Some(&cfg), &["report"])), 3);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), before);
    let r = read_report(&out);
    let d: serde_json::Value = serde_json::from_slice(&fs::read(out.join("fit/diagnostics.json")).unwrap()).unwrap();
    let s = r.sampler.unwrap();
    assert_eq!(s.max_rhat, d["max_rhat"].as_f64().unwrap());
    assert_eq!(s.total_divergences as u64, d["total_divergences"].as_u64().unwrap());
}

/// Writes a features/u pair where every pump has a negative effect.
fn single_group_inputs(dir: &Path) -> (PathBuf, PathBuf) {
    let (fp, up) = (dir.join("features.csv"), dir.join("u.csv"));
    let mut f = String::from("pump_id,mean,std\n");
    let mut u = String::from("pump_id,u_mean,hdi_low,hdi_high\n");
    for i in 0..60u32 {
        let a = ((i * 37) % 60) as f64 / 60.0 - 0.5;
        let b = ((i * 11) % 60) as f64 / 60.0;
        let target = -1.0 - 0.8 * b + 0.3 * (((i * 7) % 13) as f64 / 13.0);
        f.push_str(&format!("Q{i},{a},{b}\n"));
        u.push_str(&format!("Q{i},{target},{},{}\n", target - 1.0, target + 1.0));
    }
    fs::write(&fp, f).unwrap();
    fs::write(&up, u).unwrap();
    (fp, up)
}

#[test]
fn single_group_is_skipped_but_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    let (fp, up) = single_group_inputs(tmp.path());
    let cfg = write_config(
        tmp.path(),
        &format!("[data]\nfeatures = {fp:?}\nu_estimates = {up:?}\n[lingam]\nn_bootstrap = 20\n[run]\nsvg = true\n"),
    );
    let out = tmp.path().join("out");
    let o = hazlingam(&out, Some(&cfg), &["discover"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&out);
    let pos = r.discovery.iter().find(|g| g.group.label() == "positive").unwrap();
    let neg = r.discovery.iter().find(|g| g.group.label() == "negative").unwrap();
    assert!(!pos.ran && pos.skip_reason.as_deref().unwrap().contains("0 members"));
    assert!(neg.ran && neg.top_effects.len() == 2);
    assert!(r.gap_ratio.is_none() && r.sampler.is_none());
    for f in [
        "negative/adjacency.csv",
        "negative/order.json",
        "negative/effects.csv",
        "figures/u_histogram.csv",
        "figures/top_effects.csv",
        "figures/u_histogram.svg",
    ] {
        assert!(out.join("discover").join(f).is_file(), "{f}");
    }
    let adjacency = fs::read_to_string(out.join("discover/negative/adjacency.csv")).unwrap();
    assert!(adjacency.starts_with("from,to,effect,ci_low,ci_high,sign_stability\n"));
    assert_eq!(adjacency.lines().count(), 1 + 9);
}

#[test]
fn null_scenario_flags_every_ci_containing_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "seed = 3\n[synth.scenario]\nn_per_group = 400\nstrong_effects = {}\n[lingam]\nn_bootstrap = 100\n",
    );
    let out = tmp.path().join("out");
    let o = hazlingam(&out, Some(&cfg), &["pipeline", "--scenario"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&out);
    assert_eq!(r.discovery.len(), 2);
    for g in &r.discovery {
        assert!(g.ran);
        assert_eq!(g.all_cis_contain_zero, Some(true), "{:?}", g.group);
    }
}
