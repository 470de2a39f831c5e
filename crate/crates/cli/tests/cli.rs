use std::path::Path;
use std::process::{Command, Output};

use clap::Parser;
use maxbern_cli::RunConfig;

fn maxbern(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maxbern"))
        .args(args)
        .env_remove("MAXBERN_SEED")
        .output()
        .expect("spawn maxbern")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth_to(dir: &Path, args: &[&str]) -> std::path::PathBuf {
    let path = dir.join("cert.json");
    let mut full = vec!["synth"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--output", path.to_str().unwrap()]);
    let out = maxbern(&full);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn synth_emits_ordered_json() {
    let out = maxbern(&["synth", "--A", "2", "--a", "0.5", "--b", "1", "--gamma", "1", "--c", "0.25"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let keys: Vec<&str> = ["\"A\"", "\"a\"", "\"b\"", "\"gamma\"", "\"c\"", "\"p\"", "\"q\"", "\"alpha\"", "\"c1\"", "\"c2\"", "\"c3\"", "\"n0\"", "\"C\""]
        .to_vec();
    let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
    assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["c"], 0.25);
}

#[test]
fn synth_exit_codes() {
    // c = a is outside the domain
    let out = maxbern(&["synth", "--A", "2", "--a", "0.5", "--gamma", "1", "--c", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
    // n0 cannot fit under a tiny ceiling
    let out = maxbern(&["synth", "--A", "2", "--a", "0.5", "--b", "1", "--gamma", "1", "--c", "0.49", "--n0-ceiling", "10"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let out = maxbern(&["synth", "--A", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(maxbern(&["--help"]).status.code(), Some(0));
}

#[test]
fn synth_csv_has_one_row() {
    let out = maxbern(&["synth", "--A", "2", "--a", "0.5", "--gamma", "1", "--c", "0.25", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "A,a,b,gamma,c,p,q,alpha,c1,c2,c3,n0,C");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].split(',').nth(4).unwrap().parse::<f64>().unwrap(), 0.25);
}

#[test]
fn check_passes_above_n0() {
    let dir = tempfile::tempdir().unwrap();
    let cert = synth_to(dir.path(), &["--A", "2", "--a", "0.5", "--gamma", "1", "--c", "0.25"]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let n0 = doc["n0"].as_u64().unwrap();
    let n_max = (n0 + 30).to_string();
    let out = maxbern(&["check", "--cert", cert.to_str().unwrap(), "--n-max", &n_max, "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,t,region,margin,pass"));
    assert!(lines.all(|l| l.ends_with(",true")));
}

#[test]
fn check_below_n0_warns() {
    let dir = tempfile::tempdir().unwrap();
    let cert = synth_to(dir.path(), &["--A", "2", "--a", "0.5", "--b", "1", "--gamma", "1", "--c", "0.25"]);
    let out = maxbern(&["check", "--cert", cert.to_str().unwrap(), "--n-max", "5", "--grid", "4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("warning_empty_induction_range"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn check_rejects_tampered_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = synth_to(dir.path(), &["--A", "2", "--a", "0.5", "--gamma", "1", "--c", "0.25"]);
    let text = std::fs::read_to_string(&cert).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["C"] = serde_json::json!(1.0);
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = maxbern(&["check", "--cert", bad.to_str().unwrap(), "--n-max", "50", "--grid", "4"]);
    assert_eq!(out.status.code(), Some(3));

    std::fs::write(&bad, "{not json").unwrap();
    let out = maxbern(&["check", "--cert", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn tail_exact_and_simulated_agree() {
    let exact = maxbern(&["tail", "--spec", "rademacher", "--n", "64", "--t", "8,16", "--exact"]);
    assert_eq!(exact.status.code(), Some(0));
    let sim = maxbern(&["tail", "--spec", "rademacher", "--n", "64", "--t", "8,16", "--reps", "20000", "--level", "0.999", "--seed", "11"]);
    assert_eq!(sim.status.code(), Some(0));
    let exact = stdout(&exact);
    let sim = stdout(&sim);
    assert!(exact.starts_with("n,t,p_exact,ci_low,ci_high,bound_generalized,bound_holds\n"));
    assert!(sim.starts_with("n,t,p_hat,ci_low,ci_high,bound_generalized,bound_holds\n"));
    for (e, s) in exact.lines().skip(1).zip(sim.lines().skip(1)) {
        let p: f64 = e.split(',').nth(2).unwrap().parse().unwrap();
        let s: Vec<f64> = s.split(',').skip(3).take(2).map(|x| x.parse().unwrap()).collect();
        assert!(s[0] <= p && p <= s[1], "{p} vs {s:?}");
    }
}

#[test]
fn tail_compares_against_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = synth_to(dir.path(), &["--A", "2", "--a", "0.5", "--gamma", "1", "--c", "0.25"]);
    let out = maxbern(&["tail", "--spec", "rademacher", "--n", "100", "--t", "10,30", "--exact", "--cert", cert.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    for line in stdout(&out).lines().skip(1) {
        assert!(line.ends_with(",true"), "{line}");
        assert!(!line.split(',').nth(5).unwrap().is_empty());
    }
}

#[test]
fn tail_runs_are_reproducible_and_thread_independent() {
    let base = ["tail", "--spec", "{\"kind\":\"ar1\",\"phi\":0.5}", "--n", "200", "--t", "5,20", "--reps", "2000", "--seed", "9"];
    let mut one = base.to_vec();
    one.extend_from_slice(&["--threads", "1"]);
    let mut four = base.to_vec();
    four.extend_from_slice(&["--threads", "4"]);
    let a = maxbern(&one);
    let b = maxbern(&four);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn seed_from_environment() {
    let args = ["tail", "--spec", "uniform", "--n", "50", "--t", "3", "--reps", "500"];
    let env = Command::new(env!("CARGO_BIN_EXE_maxbern"))
        .args(args)
        .env("MAXBERN_SEED", "21")
        .output()
        .unwrap();
    let mut with_flag = args.to_vec();
    with_flag.extend_from_slice(&["--seed", "21"]);
    let flag = maxbern(&with_flag);
    assert_eq!(env.status.code(), Some(0));
    assert_eq!(env.stdout, flag.stdout);

    let both = Command::new(env!("CARGO_BIN_EXE_maxbern"))
        .args(&with_flag)
        .env("MAXBERN_SEED", "21")
        .output()
        .unwrap();
    assert_eq!(both.status.code(), Some(1));
}

#[test]
fn tail_exact_rejects_continuous_process() {
    let out = maxbern(&["tail", "--spec", "uniform", "--n", "10", "--t", "1", "--exact"]);
    assert_eq!(out.status.code(), Some(1));
    let out = maxbern(&["tail", "--spec", "nonsense", "--n", "10", "--t", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn lil_yz_summary_rows() {
    let out = maxbern(&["lil", "--spec", "yz", "--n-max", "4096", "--reps", "40", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "rep,stat,onesided_stat,y_value");
    assert_eq!(lines.len(), 1 + 40 + 3);
    assert!(lines[41].starts_with("q05,"));
    assert!(lines[43].starts_with("q95,"));
}

#[test]
fn lil_json_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lil.json");
    let out = maxbern(&["lil", "--spec", "rademacher", "--n-max", "1024", "--reps", "10", "--format", "json", "--output", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["paths"].as_array().unwrap().len(), 10);
    assert_eq!(v["checkpoints"][0], 16);
    assert_eq!(v["summary"].as_array().unwrap().len(), 3);
}

#[test]
fn d1_json() {
    let out = maxbern(&["d1", "--M", "1", "--eta", "0.5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["D1", "M", "eta"]);
    assert!(v["D1"].as_f64().unwrap() > 0.0);
    assert_eq!(maxbern(&["d1", "--M", "-1", "--eta", "0.5"]).status.code(), Some(1));
}

#[test]
fn run_config_round_trips_through_json() {
    for args in [
        vec!["maxbern", "synth", "--A", "2", "--a", "0.5", "--gamma", "1", "--c", "0.25"],
        vec!["maxbern", "--seed", "3", "tail", "--spec", "yz", "--n", "10", "--t", "1,2.5", "--exact"],
        vec!["maxbern", "check", "--cert", "x.json", "--tail-count", "summands", "--format", "json"],
        vec!["maxbern", "lil", "--spec", "markov", "--threads", "2"],
        vec!["maxbern", "d1", "--M", "2", "--eta", "0.1", "--output", "out.json"],
    ] {
        let config = RunConfig::try_parse_from(&args).unwrap();
        let text = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config, "{text}");
    }
}
