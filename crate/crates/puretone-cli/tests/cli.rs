use std::path::Path;
use std::process::{Command, Output};

fn puretone(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_puretone"))
        .current_dir(dir)
        .env_remove("PURETONE_CONFIG")
        .env_remove("PURETONE_RECIPE")
        .env_remove("PURETONE_OUT")
        .env_remove("PURETONE_SEED")
        .env_remove("PURETONE_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn freq_on_a_jump_free_profile_lists_k_pi_over_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("flat.json"),
        r#"{"problem": {"frame": "nondim-scaled",
            "profile": {"type": "piecewise", "widths": [1.0], "jumps": []},
            "gas": {"law": "gamma-law", "gamma": 1.4}, "k": 1},
           "freq": {"k_max": 5}}"#,
    )
    .unwrap();
    let out = puretone(dir.path(), &["--config", "flat.json", "--out", "o", "freq"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "o/freq.json");
    for (i, row) in r["result"]["frequencies"].as_array().unwrap().iter().enumerate() {
        let k = (i + 1) as f64;
        let omega = row["omega"].as_f64().unwrap();
        assert!((omega - k * std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}

#[test]
fn malformed_json_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\n  \"seed\": 1,\n  nope\n}").unwrap();
    let out = puretone(dir.path(), &["--config", "bad.json", "scan"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3 column"), "{err}");
}

#[test]
fn unknown_recipe_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = puretone(dir.path(), &["--recipe", "no-such-thing", "solve"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn isentropic_resonance_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("flat.json"),
        r#"{"problem": {"frame": "nondim-scaled",
            "profile": {"type": "piecewise", "widths": [2.0], "jumps": []},
            "gas": {"law": "gamma-law", "gamma": 1.4}, "k": 1, "alphas": [0.001]}}"#,
    )
    .unwrap();
    let out = puretone(dir.path(), &["--config", "flat.json", "--out", "o", "resonance"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(dir.path(), "o/resonance.json")["status"], "resonant");
    let out = puretone(dir.path(), &["--config", "flat.json", "--out", "o", "solve"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solver_failure_exits_five() {
    let dir = tempfile::tempdir().unwrap();
    let mut problem = recipe_problem("square-wave-k1");
    problem["settings"]["aux_max_iter"] = serde_json::json!(1);
    problem["settings"]["aux_tol"] = serde_json::json!(1e-300);
    let cfg = serde_json::json!({ "problem": problem });
    std::fs::write(dir.path().join("tight.json"), cfg.to_string()).unwrap();
    let out = puretone(dir.path(), &["--config", "tight.json", "--out", "o", "solve"]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
}

/// The resolved problem a recipe expands to, as echoed in a report.
fn recipe_problem(name: &str) -> serde_json::Value {
    let dir = tempfile::tempdir().unwrap();
    let out = puretone(dir.path(), &["--recipe", name, "--out", "o", "resonance"]);
    assert_eq!(out.status.code(), Some(0));
    report(dir.path(), "o/resonance.json")["config"]["problem"].clone()
}

#[test]
fn solve_report_is_deterministic_and_carries_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let a = puretone(dir.path(), &["--recipe", "square-wave-k1", "--out", "a", "--threads", "1", "solve"]);
    let b = puretone(dir.path(), &["--recipe", "square-wave-k1", "--out", "b", "--threads", "4", "solve"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(b.status.code(), Some(0));
    let ra = std::fs::read(dir.path().join("a/solve.json")).unwrap();
    let rb = std::fs::read(dir.path().join("b/solve.json")).unwrap();
    assert_eq!(ra, rb);
    let r = report(dir.path(), "a/solve.json");
    assert_eq!(r["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
    assert!(r["provenance"]["puretone_version"].is_string());
    for s in r["result"]["solutions"].as_array().unwrap() {
        assert!(s["boundary_residual"].as_f64().unwrap() < 1e-9);
    }
    let ratio = r["result"]["deviation_ratios"][0].as_f64().unwrap();
    assert!((3.5..=4.5).contains(&ratio), "{ratio}");
}

#[test]
fn environment_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_puretone"))
        .current_dir(dir.path())
        .env("PURETONE_RECIPE", "square-wave-k1")
        .env("PURETONE_OUT", "envout")
        .env("PURETONE_SEED", "17")
        .arg("divisors")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "envout/divisors.json");
    assert_eq!(r["provenance"]["seed"], 17);
    let csv = std::fs::read_to_string(dir.path().join("envout/divisors.csv")).unwrap();
    assert!(csv.starts_with("j,delta_j\n"));
    assert_eq!(csv.lines().count(), 33);
}

#[test]
fn scan_depends_only_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("scan.json"), r#"{"scan": {"n_samples": 200}}"#).unwrap();
    let run = |out: &str, seed: &str, threads: &str| {
        let o = puretone(dir.path(), &["--config", "scan.json", "--out", out, "--seed", seed, "--threads", threads, "scan"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(out).join("scan.json")).unwrap()
    };
    assert_eq!(run("s1", "5", "1"), run("s2", "5", "3"));
}

#[test]
fn tile_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("tile.json"),
        r#"{"recipe": "square-wave-k1", "tile": {"nx": 16, "nt": 64, "format": "json"}}"#,
    )
    .unwrap();
    let out = puretone(dir.path(), &["--config", "tile.json", "--out", "o", "tile"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = puretone(dir.path(), &["--config", "tile.json", "--out", "o", "verify", "--tile", "o/tiled.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "o/verify.json");
    assert!(r["result"]["residuals"]["max_seam_gap"].as_f64().unwrap() < 1e-8);
    assert_eq!(r["result"]["residuals"]["panel_consistency"].as_f64().unwrap(), 0.0);
}

#[test]
fn general_freq_writes_eigenfunctions() {
    let dir = tempfile::tempdir().unwrap();
    let out = puretone(dir.path(), &["--recipe", "three-jump-acoustic-k2", "--out", "o", "freq", "--general"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/eigenfunction_k2.csv")).unwrap();
    assert!(csv.starts_with("x,phi,psi\n"));
    let out = puretone(dir.path(), &["--recipe", "square-wave-k1", "--out", "o", "freq", "--general"]);
    assert_eq!(out.status.code(), Some(2));
}
