use std::path::PathBuf;
use std::process::{Command, Output};

fn rfkr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfkr")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("rfkr-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json output")
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn hypercube_coeffs_match_enumeration() {
    let v = json(&rfkr(&["coeffs", "--domain", "hypercube", "--d", "10", "--activation", "shifted_relu:0.5"]));
    let c = &v["coeffs"];
    assert_eq!(v["version"], 1);
    assert_eq!(c["kmax"], 10);
    let d = 10usize;
    let xi: Vec<f64> = c["xi"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    // Exact oracle: x has j coordinates equal to -1 with probability C(d, j) / 2^d;
    // Q_k(d - 2j) is the Kravchuk value K_k(j) / C(d, k).
    let mut l2 = 0.0;
    for (k, &got) in xi.iter().enumerate() {
        let mut e = 0.0;
        for j in 0..=d {
            let w = binom(d, j) / 2f64.powi(d as i32);
            let t = (d as f64 - 2.0 * j as f64) / (d as f64).sqrt();
            let sigma = (t - 0.5).max(0.0);
            let kraw: f64 = (0..=k).map(|i| (-1f64).powi(i as i32) * binom(j, i) * binom(d - j, k - i)).sum();
            e += w * sigma * kraw / binom(d, k);
            if k == 0 {
                l2 += w * sigma * sigma;
            }
        }
        assert!((got - e).abs() <= 1e-12, "k={k}: {got} vs {e}");
    }
    let parseval: f64 = xi.iter().enumerate().map(|(k, x)| x * x * binom(d, k)).sum();
    assert!((parseval - l2).abs() <= 1e-10 * l2);
    assert!((c["total_l2"].as_f64().unwrap() - l2).abs() <= 1e-12);
}

#[test]
fn min_norm_fit_interpolates() {
    let v = json(&rfkr(&["fit", "--lambda", "zero", "--d", "10", "--n", "20", "--N", "50", "--masses", "1:0.5,2:0.5", "--n-test", "1000"]));
    assert!(v["relative_training_residual"].as_f64().unwrap() <= 1e-6);
    assert!(v["risk"]["mc_risk"].as_f64().unwrap().is_finite());
    assert_eq!(v["selection"]["regime"], "over");
}

#[test]
fn figure1_preset_uses_the_staircase_target() {
    let dir = scratch("fig");
    let out = dir.join("fig.csv");
    let o = rfkr(&["figure1", "--d", "6", "--reps", "1", "--grid-n", "1.2,2.2", "--grid-N", "2.2", "--n-test", "200", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rfkr::harness::read_csv(&out).unwrap();
    assert_eq!(rows.len(), 4);
    // Preset level masses 0.4, 0.4, 0.1, 0.1 on degrees 1..4.
    assert_eq!(rows[0].theory_risk, 0.6);
    assert_eq!(rows[2].theory_risk, 0.2);
    assert_eq!(rows[0].lambda, 0.0);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn config_file_with_flag_override() {
    let dir = scratch("cfg");
    let cfg = dir.join("run.cfg");
    let out = dir.join("run.csv");
    std::fs::write(&cfg, "d = 7\nmasses = 1:1\ngrid_n = 1\ngrid_N = 1.3\nreps = 1\nn_test = 200\n").unwrap();
    let o = rfkr(&["grid", "--config", cfg.to_str().unwrap(), "--d", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = rfkr::harness::read_csv(&out).unwrap();
    assert_eq!(rows[0].d, 9);
    assert_eq!(rows[0].n, 9);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn usage_errors_exit_with_two() {
    let o = rfkr(&["grid", "--bogus", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--bogus"));

    let dir = scratch("bad");
    let cfg = dir.join("bad.cfg");
    std::fs::write(&cfg, "d = 7\nwidth = 3\n").unwrap();
    let o = rfkr(&["grid", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
    std::fs::remove_dir_all(&dir).unwrap();

    let o = rfkr(&["grid", "--d", "7", "--masses", "1:1", "--grid-n", "", "--grid-N", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rfkr(&["fit", "--d", "2", "--n", "3", "--N", "3", "--masses", "1:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(rfkr(&["--help"]).status.code(), Some(0));
}

#[test]
fn grid_csv_is_identical_across_thread_counts() {
    let dir = scratch("thr");
    let run = |t: &str| {
        let p = dir.join(format!("t{t}.csv"));
        let o = rfkr(&["grid", "--d", "7", "--masses", "1:0.6,2:0.4", "--grid-n", "1,1.5", "--grid-N", "1.2,1.7", "--reps", "2", "--n-test", "200", "--threads", t, "--out", p.to_str().unwrap()]);
        assert!(o.status.success());
        rfkr::harness::read_csv(&p).unwrap().iter().map(|r| r.without_runtime()).collect::<Vec<_>>()
    };
    assert_eq!(run("1"), run("2"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn check_and_diagnose_emit_reports() {
    let v = json(&rfkr(&["check", "--d", "20", "--n", "400", "--N", "8000"]));
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["name"] == "separation"));
    let v = json(&rfkr(&["diagnose", "--d", "10", "--n", "40", "--N", "150"]));
    assert!(v["delta_op"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["m_used"], 11);
}

#[test]
fn coefficient_cache_is_reused() {
    let dir = scratch("cache");
    let args = ["coeffs", "--d", "9", "--cache", dir.to_str().unwrap()];
    let a = rfkr(&args);
    let files: Vec<_> = std::fs::read_dir(&dir).unwrap().collect();
    assert_eq!(files.len(), 1);
    let b = rfkr(&args);
    assert_eq!(a.stdout, b.stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}
