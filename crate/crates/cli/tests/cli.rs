use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hgw(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hgw"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn gen(dir: &Path, kind: &str, p: &str, n: &str, seed: &str) {
    let o = hgw(dir, &["gen-data", "--kind", kind, "--p", p, "--n", n, "--seed", seed]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

#[test]
fn gen_data_is_deterministic() {
    let t = tempfile::tempdir().unwrap();
    let (a, b, c) = (t.path().join("a"), t.path().join("b"), t.path().join("c"));
    gen(&a, "circle", "8", "40", "11");
    gen(&b, "circle", "8", "40", "11");
    gen(&c, "circle", "8", "40", "12");
    assert_eq!(read(a.join("X.csv")), read(b.join("X.csv")));
    assert_eq!(read(a.join("meta.json")), read(b.join("meta.json")));
    assert_ne!(read(a.join("X.csv")), read(c.join("X.csv")));
    assert_eq!(read(a.join("omega0.csv")), read(c.join("omega0.csv")));
    let x = read(a.join("X.csv"));
    assert_eq!(x.lines().count(), 40);
    assert!(x.lines().all(|l| l.split(',').count() == 8));
}

#[test]
fn invalid_true_model_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let o = hgw(t.path(), &["gen-data", "--kind", "ar4", "--p", "4", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hgw(t.path(), &["gen-data", "--kind", "star", "--p", "30", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let o = hgw(t.path(), &["gen-data", "--kind", "nope", "--p", "10", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn metrics_of_truth_against_itself() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar2", "10", "30", "1");
    let g0 = t.path().join("graph0.edges");
    let om = t.path().join("omega0.csv");
    let out = t.path().join("m");
    let o = hgw(
        &out,
        &["metrics", "--graph", g0.to_str().unwrap(), "--truth", g0.to_str().unwrap(),
          "--omega-hat", om.to_str().unwrap(), "--omega0", om.to_str().unwrap()],
    );
    assert!(o.status.success());
    let sel = read(out.join("selection.csv"));
    let row: Vec<f64> = sel.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![1.0; 4]);
    let err = read(out.join("errors.csv"));
    let row: Vec<f64> = err.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row, vec![0.0; 4]);
}

fn bf_json(out: &Path, data: &Path, g1: &Path, g0: &Path) -> serde_json::Value {
    let o = hgw(out, &["bf", "--data", data.to_str().unwrap(), "--g1", g1.to_str().unwrap(), "--g0", g0.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn bayes_factor_is_antisymmetric() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "6", "50", "4");
    let data = t.path().join("X.csv");
    let g0 = t.path().join("graph0.edges");
    let empty = t.path().join("empty.edges");
    fs::write(&empty, "p=6\n").unwrap();
    let same = bf_json(&t.path().join("o"), &data, &g0, &g0);
    assert_eq!(same["log_bayes_factor"].as_f64(), Some(0.0));
    let fwd = bf_json(&t.path().join("o"), &data, &g0, &empty);
    let back = bf_json(&t.path().join("o"), &data, &empty, &g0);
    let (f, b) = (fwd["log_bayes_factor"].as_f64().unwrap(), back["log_bayes_factor"].as_f64().unwrap());
    assert!(f > 0.0);
    assert!((f + b).abs() < 1e-9 * f.abs());
}

#[test]
fn empty_search_grid_exits_2() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "5", "30", "2");
    let data = t.path().join("X.csv");
    let o = hgw(&t.path().join("s"), &["search", "--data", data.to_str().unwrap(), "--thresholds", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mcmc_outputs_and_repeatability() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "5", "60", "5");
    let data = t.path().join("X.csv");
    let run = |dir: &str| {
        let out = t.path().join(dir);
        let o = hgw(&out, &["mcmc", "--data", data.to_str().unwrap(), "--iterations", "300", "--burn-in", "100", "--seed", "9"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["inclusion.csv", "trace.csv", "median_graph.edges", "best_graph.edges"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    assert_eq!(read(a.join("trace.csv")).lines().count(), 401);
    let meta: serde_json::Value = serde_json::from_str(&read(a.join("meta.json"))).unwrap();
    assert_eq!(meta["seed"].as_u64(), Some(9));
    assert!(meta["hyperparameters"]["g"].as_f64().unwrap() > 0.0);
}

#[test]
fn p4_oracle_reports_total_variation() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "4", "40", "6");
    let data = t.path().join("X.csv");
    let out = t.path().join("m");
    let o = hgw(&out, &["mcmc", "--data", data.to_str().unwrap(), "--iterations", "20000", "--burn-in", "1000", "--kernel", "exact", "--p4-oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value = serde_json::from_str(&read(out.join("meta.json"))).unwrap();
    assert!(meta["p4_oracle_tv"].as_f64().unwrap() < 0.05);
}

#[test]
fn large_clique_is_a_model_error() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "6", "3", "1");
    let complete = t.path().join("k6.edges");
    let mut s = String::from("p=6\n");
    for i in 1..=6 {
        for j in (i + 1)..=6 {
            s.push_str(&format!("{i} {j}\n"));
        }
    }
    fs::write(&complete, s).unwrap();
    let data = t.path().join("X.csv");
    let o = hgw(&t.path().join("o"), &["bf", "--data", data.to_str().unwrap(), "--g1", complete.to_str().unwrap(), "--g0", complete.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("size 6"));
}

#[test]
fn l2_estimate_respects_graph() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "6", "50", "8");
    let data = t.path().join("X.csv");
    let g0 = t.path().join("graph0.edges");
    let out = t.path().join("e");
    let o = hgw(&out, &["estimate", "--data", data.to_str().unwrap(), "--graph", g0.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(out.join("omega_hat.csv"));
    for (i, line) in text.lines().enumerate() {
        for (j, v) in line.split(',').enumerate() {
            let v: f64 = v.parse().unwrap();
            if i.abs_diff(j) > 1 {
                assert_eq!(v, 0.0);
            } else {
                assert!(v != 0.0);
            }
        }
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let t = tempfile::tempdir().unwrap();
    gen(t.path(), "ar1", "6", "60", "3");
    let data = t.path().join("X.csv");
    let run = |threads: &str| {
        let out = t.path().join(format!("t{threads}"));
        let o = hgw(&out, &["mcmc", "--data", data.to_str().unwrap(), "--iterations", "200", "--burn-in", "50", "--chains", "3", "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = hgw(&out.join("s"), &["search", "--data", data.to_str().unwrap(), "--ridges", "5", "--thresholds", "10", "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let (a, b) = (run("1"), run("4"));
    for f in ["inclusion.csv", "chain.json", "s/mode_graph.edges", "s/mode_score.json", "s/candidates_meta.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
}
