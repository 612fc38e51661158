use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use genclus::bundle::read_theta;

fn genclus(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_genclus"))
        .args(args)
        .output()
        .expect("spawn genclus")
}

fn ok(args: &[&str]) -> String {
    let out = genclus(args);
    assert!(
        out.status.success(),
        "genclus {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str]) -> String {
    let out = genclus(args);
    assert!(!out.status.success(), "genclus {args:?} unexpectedly succeeded");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn content_lines(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().filter(|l| !l.starts_with('#') && !l.is_empty()).count()
}

fn small_network(dir: &Path) {
    ok(&["generate", "--out", s(dir), "--n-temp", "60", "--n-precip", "40", "--n-obs", "3", "--seed", "2"]);
}

#[test]
fn generate_setting_one_sizes() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    ok(&["generate", "--out", s(&net), "--n-temp", "1000", "--n-precip", "250", "--n-obs", "5", "--seed", "3"]);
    assert_eq!(content_lines(&net.join("nodes.tsv")), 1250);
    assert_eq!(content_lines(&net.join("edges.tsv")), 12500);
    assert_eq!(content_lines(&net.join("truth.tsv")), 1250);
    assert_eq!(content_lines(&net.join("attributes.tsv")), 1250 * 5);
}

#[test]
fn generate_is_byte_identical_on_rerun() {
    let d = tempfile::tempdir().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    small_network(&a);
    small_network(&b);
    for f in ["nodes.tsv", "edges.tsv", "attributes.tsv", "schema.txt", "truth.tsv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // the manifest of one run is a config for the next
    let c = d.path().join("c");
    ok(&["generate", "--config", s(&a.join("manifest.txt")), "--out", s(&c)]);
    assert_eq!(fs::read(a.join("edges.tsv")).unwrap(), fs::read(c.join("edges.tsv")).unwrap());
}

#[test]
fn generate_rejects_fewer_sensors_than_patterns() {
    let d = tempfile::tempdir().unwrap();
    let err = fails(&["generate", "--out", s(d.path()), "--n-precip", "3"]);
    assert!(err.contains("error"), "{err}");
}

#[test]
fn cluster_writes_bundle_and_reruns_from_manifest() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    small_network(&net);
    let run = d.path().join("run");
    ok(&["cluster", "--data", s(&net), "--k", "4", "--out", s(&run), "--outer-iters", "3", "--seed", "5", "--threads", "1"]);
    for f in [
        "theta.tsv",
        "gamma.tsv",
        "beta.temperature.tsv",
        "beta.precipitation.tsv",
        "trace.tsv",
        "gamma_trace.tsv",
        "g1_trace.tsv",
        "labels_trace.tsv",
        "manifest.txt",
    ] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert_eq!(content_lines(&run.join("theta.tsv")), 100 * 4);
    assert_eq!(content_lines(&run.join("gamma.tsv")), 4);
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 5"));
    assert!(manifest.contains("digest.edges = "));
    assert!(manifest.contains("time.cluster_s = "));

    let rerun = d.path().join("rerun");
    ok(&["cluster", "--config", s(&run.join("manifest.txt")), "--out", s(&rerun)]);
    assert_eq!(fs::read(run.join("theta.tsv")).unwrap(), fs::read(rerun.join("theta.tsv")).unwrap());
    assert_eq!(fs::read(run.join("gamma.tsv")).unwrap(), fs::read(rerun.join("gamma.tsv")).unwrap());
}

#[test]
fn cluster_thread_count_does_not_change_theta() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    small_network(&net);
    let mut thetas = Vec::new();
    for t in ["1", "4"] {
        let run = d.path().join(format!("run{t}"));
        ok(&["cluster", "--data", s(&net), "--k", "4", "--out", s(&run), "--outer-iters", "2", "--threads", t]);
        thetas.push(read_theta(&run.join("theta.tsv")).unwrap().1);
    }
    assert!(thetas[0].max_abs_diff(&thetas[1]) <= 1e-9);
}

#[test]
fn cluster_names_a_missing_attribute() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    small_network(&net);
    let err = fails(&["cluster", "--data", s(&net), "--k", "4", "--attributes", "humidity", "--out", s(&d.path().join("r"))]);
    assert!(err.contains("humidity"), "{err}");
    let err = fails(&["cluster", "--data", s(&net), "--out", s(&d.path().join("r"))]);
    assert!(err.contains("--k"), "{err}");
}

#[test]
fn evaluate_truth_one_hots_give_unit_nmi() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    small_network(&net);
    let run = d.path().join("run");
    fs::create_dir_all(&run).unwrap();
    let mut theta = String::new();
    for line in fs::read_to_string(net.join("truth.tsv")).unwrap().lines().filter(|l| !l.starts_with('#')) {
        let mut cols = line.split('\t');
        let id = cols.next().unwrap();
        let label: usize = cols.next().unwrap().parse().unwrap();
        for k in 0..4 {
            theta.push_str(&format!("{id}\t{k}\t{}\n", if k == label { 1 } else { 0 }));
        }
    }
    fs::write(run.join("theta.tsv"), theta).unwrap();
    let out = d.path().join("eval");
    let metrics = ok(&[
        "evaluate",
        "--run",
        s(&run),
        "--data",
        s(&net),
        "--truth",
        s(&net.join("truth.tsv")),
        "--relation",
        "TP",
        "--out",
        s(&out),
    ]);
    for key in ["nmi.overall = 1\n", "nmi.T = 1\n", "nmi.P = 1\n"] {
        assert!(metrics.contains(key), "{metrics}");
    }
    let maps: Vec<&str> = metrics
        .lines()
        .filter(|l| l.starts_with("map.TP.") && l.split(" = ").next().unwrap().matches('.').count() == 2)
        .collect();
    assert_eq!(maps.len(), 3, "{metrics}");
    assert!(out.join("manifest.txt").exists());
}

#[test]
fn evaluate_without_theta_is_an_explicit_error() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    small_network(&net);
    let err = fails(&["evaluate", "--run", s(&d.path().join("empty")), "--data", s(&net), "--out", s(&d.path().join("e"))]);
    assert!(err.contains("missing artifact") && err.contains("theta.tsv"), "{err}");
}

#[test]
fn evaluate_and_predict_on_a_holdout_run() {
    let d = tempfile::tempdir().unwrap();
    let net = d.path().join("net");
    small_network(&net);
    let run = d.path().join("run");
    ok(&["cluster", "--data", s(&net), "--k", "4", "--out", s(&run), "--outer-iters", "2", "--holdout", "0.2"]);
    let heldout = run.join("heldout");
    let kept = content_lines(&heldout.join("edges.tsv"));
    assert!(kept > 0 && kept < 1000);
    let metrics = ok(&[
        "evaluate",
        "--run",
        s(&run),
        "--data",
        s(&net),
        "--links",
        s(&heldout),
        "--relation",
        "PT",
        "--similarity",
        "neg_cross_entropy",
        "--out",
        s(&d.path().join("eval")),
    ]);
    assert!(metrics.contains("map.PT.neg_cross_entropy = "), "{metrics}");
    assert!(d.path().join("eval/nmi_trace.tsv").exists());

    let pred = d.path().join("pred");
    ok(&["predict", "--run", s(&run), "--data", s(&net), "--relation", "TP", "--top", "5", "--out", s(&pred)]);
    assert_eq!(content_lines(&pred.join("predictions.tsv")), 60 * 5);
    let err = fails(&["predict", "--run", s(&run), "--data", s(&net), "--relation", "TP", "--query", "P00001", "--out", s(&pred)]);
    assert!(err.contains("P00001"), "{err}");
}

#[test]
fn reproduce_reports_the_nine_network_grid() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("rep");
    let report = ok(&["reproduce", "weather-1", "--out", s(&out), "--n-temp", "40", "--outer-iters", "2"]);
    assert_eq!(content_lines(&out.join("report.tsv")), 9);
    assert!(report.contains("learned strengths, 5 obs"));
    assert!(report.contains("total runtime"));
    for line in fs::read_to_string(out.join("report.tsv")).unwrap().lines().skip(1) {
        let gammas: Vec<f64> = line.split('\t').skip(7).take(4).map(|x| x.parse().unwrap()).collect();
        assert!(gammas.iter().all(|g| g.is_finite() && *g >= 0.0), "{line}");
    }
}
