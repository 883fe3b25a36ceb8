use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BANDIT: &str = "steps = 40\nreps = 2\nresample_base = 10\nheldout_contexts = 3\n[grid]\npoints = 12\n[mean_price]\nhistory = 200\n";

const FLEET: &str = "batches = 3\nreps = 1\npolicies = [\"kg\", \"exploit\"]\n\
[drivers]\ndrivers = 12\n[lookahead]\nn_paths = 2\nhorizon = 4\n[warmup]\niterations = 1\n[grid]\npoints = 12\n";

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freightbid")).args(args).output().expect("spawn freightbid")
}

fn run_ok(args: &[&str]) -> String {
    let out = bin(args);
    assert!(out.status.success(), "{args:?} failed\nstdout: {}\nstderr: {}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn bandit_sim_writes_outputs_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.toml", BANDIT);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let stdout = run_ok(&["bandit-sim", "--config", s(&cfg), "--seed", "7", "--out", s(out), "--policies", "kg,exploit,mean-price"]);
        assert!(stdout.contains("avg_regret"));
    }
    for f in ["manifest.json", "config.toml", "kg.csv", "exploit.csv", "mean-price.csv", "summary.csv", "bagging.csv"] {
        assert!(a.join(f).is_file(), "missing {f}");
    }
    assert!(!a.join("ts.csv").exists());
    for f in ["kg.csv", "exploit.csv", "mean-price.csv", "summary.csv", "bagging.csv", "config.toml"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs between identical runs");
    }
    let trace = std::fs::read_to_string(a.join("kg.csv")).unwrap();
    assert_eq!(trace.lines().count(), 1 + 2 * 40);

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "bandit-sim");
    assert_eq!(manifest["seed"], 7);
    let sha = manifest["config_sha256"].as_str().unwrap();
    assert_eq!(sha.len(), 64);
    assert!(sha.bytes().all(|c| c.is_ascii_hexdigit()));
    // the effective config records the seed override
    assert!(std::fs::read_to_string(a.join("config.toml")).unwrap().contains("seed = 7"));
}

#[test]
fn refuses_non_empty_output_without_force() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "b.toml", BANDIT);
    let out = tmp.path().join("o");
    std::fs::create_dir(&out).unwrap();
    write(&out, "keep.txt", "x");
    let args = ["bandit-sim", "--config", s(&cfg), "--out", s(&out), "--policies", "kg"];
    let r = bin(&args);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.join("manifest.json").exists());
    let mut forced = args.to_vec();
    forced.push("--force");
    run_ok(&forced);
    assert!(out.join("keep.txt").exists() && out.join("kg.csv").exists());
}

#[test]
fn config_errors_exit_2_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write(tmp.path(), "bad.toml", "steps = 10\nbogus = 3\n");
    let r = bin(&["bandit-sim", "--config", s(&bad), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("bad.toml:2"), "{err}");

    let theta = write(tmp.path(), "f.toml", "[lookahead]\ntheta_accept = 1.5\n");
    let r = bin(&["fleet-sim", "--config", s(&theta), "--out", s(&tmp.path().join("f"))]);
    assert_eq!(r.status.code(), Some(2));

    let r = bin(&["bandit-sim", "--config", s(&tmp.path().join("missing.toml")), "--out", s(&tmp.path().join("m"))]);
    assert_eq!(r.status.code(), Some(2));
    let r = bin(&["fleet-sim", "--policies", "mean-price", "--out", s(&tmp.path().join("mp"))]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn scenario_replay_and_fit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "f.toml", FLEET);
    let scen = tmp.path().join("scen");
    let stdout = run_ok(&["gen-scenario", "--config", s(&cfg), "--out", s(&scen), "--history", "400"]);
    assert!(stdout.contains("12 drivers") && stdout.contains("400 quotes"), "{stdout}");

    let (r1, r2) = (tmp.path().join("r1"), tmp.path().join("r2"));
    for out in [&r1, &r2] {
        run_ok(&[
            "fleet-sim",
            "--config",
            s(&cfg),
            "--out",
            s(out),
            "--trace",
            s(&scen.join("offers.csv")),
            "--drivers",
            s(&scen.join("drivers.csv")),
        ]);
    }
    for f in ["kg.csv", "exploit.csv", "summary.csv"] {
        assert_eq!(std::fs::read(r1.join(f)).unwrap(), std::fs::read(r2.join(f)).unwrap(), "{f}");
    }
    // the replayed trace fixes the offers: one trace row per offered load
    let offers = std::fs::read_to_string(scen.join("offers.csv")).unwrap().lines().count() - 1;
    let steps = std::fs::read_to_string(r1.join("kg.csv")).unwrap().lines().count() - 1;
    assert_eq!(offers, steps);

    let fitted = tmp.path().join("fit");
    let stdout = run_ok(&["fit", "--history", s(&scen.join("history.csv")), "--out", s(&fitted)]);
    assert!(stdout.contains("carrier: 400 rows") && stdout.contains("shipper: 400 rows"), "{stdout}");
    for f in ["carrier_weights.csv", "shipper_weights.csv", "registry.json"] {
        assert!(fitted.join(f).is_file(), "missing {f}");
    }
}

#[test]
fn check_theory_small_suites() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "t.toml",
        "nonnegativity_draws = 200\noracle_instances = 30\nnullity_pairs = 10\nconsistency_seeds = 2\nconsistency_required = 2\nconsistency_steps = 300\nconsistency_contexts = 10\n",
    );
    let out = tmp.path().join("t");
    let stdout = run_ok(&["check-theory", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5, "{stdout}");
    let report = std::fs::read_to_string(out.join("theory.csv")).unwrap();
    assert_eq!(report.lines().count(), 6);
}
