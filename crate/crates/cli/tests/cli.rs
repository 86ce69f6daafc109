use std::path::Path;
use std::process::{Command, Output};

const PAPER_4ARM: &str = include_str!("../presets/paper-4arm.toml");

const SMALL: &str = r#"
[trial]
p0 = [0.05, 0.15]
p1 = [0.2, 0.3]
max_n = 20
interims = [10, 20]

[mcmc]
burn_in = 200
kept_draws = 1000

[grid]
v0_points = 2
sigma0_sq_points = 2
half_cauchy_points = 2
reps_per_point = 20
refine_top = 1
refine_reps = 40

[run]
n_reps = 80
base_seed = 11

[[design]]
name = "Independent"
kind = "independent"
zeta = [0.7, 0.7]
delta = [0.0, 0.0]

[[design]]
name = "OBHM"
kind = "obhm"
zeta = [0.715, 0.7]
delta = [0.32, 0.0]
optimize = "inverse-gamma"

[[design]]
name = "AOBHM"
kind = "aobhm"
zeta = [0.73, 0.7]
delta = [0.32, 0.0]
optimize = "inverse-gamma"

[[scenario]]
name = "null"
true_p = [0.05, 0.15]

[[scenario]]
name = "mixed"
true_p = [0.2, 0.15]
"#;

fn basket(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_basket"))
        .args(args)
        .env_remove("BASKET_THREADS")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outs = Vec::new();
    for threads in ["1", "4"] {
        let out = dir.path().join(format!("t{threads}"));
        let o = basket(&["simulate", "--config", &cfg, "--threads", threads, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(out);
    }
    let mut names: Vec<_> = std::fs::read_dir(&outs[0])
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for required in ["oc.csv", "policy.toml", "priors.toml", "search_OBHM_all.csv", "search_AOBHM_partition1.csv"] {
        assert!(names.iter().any(|n| n == required), "missing {required}: {names:?}");
    }
    for name in &names {
        let a = std::fs::read(outs[0].join(name)).unwrap();
        let b = std::fs::read(outs[1].join(name)).unwrap();
        assert!(a == b, "{name:?} differs between thread counts");
    }
}

#[test]
fn rerun_reproduces_oc_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let run = || {
        let o = basket(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("oc.csv")).unwrap()
    };
    let first = run();
    assert_eq!(first, run());
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("# basket "));
    assert!(text.contains("# base_seed: 11"));
    assert!(text.contains("scenario,design,arm,claim_prob,mc_se,mean_n,early_stop_prob,n_reps,seed"));
    // 2 scenarios × 3 designs × 2 arms.
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 12);
}

#[test]
fn seed_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = basket(&["calibrate", "--config", &cfg, "--seed", "5", "--reps", "40", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let policy = std::fs::read_to_string(out.join("policy.toml")).unwrap();
    assert!(policy.contains("# base_seed: 5"));
    assert!(policy.contains("null_claim_prob"));
    assert!(!out.join("oc.csv").exists());
}

#[test]
fn empty_config_lists_required_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "");
    let o = basket(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = stderr(&o);
    for key in ["trial", "design", "scenario"] {
        assert!(err.contains(key), "{err}");
    }
}

#[test]
fn zero_replicates_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = basket(&["simulate", "--preset", "paper-4arm", "--reps", "0", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("reps"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), &SMALL.replace("n_reps = 80", "n_reps = 0"));
    let o = basket(&["simulate", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("n_reps"), "{}", stderr(&o));
}

#[test]
fn missing_source_and_unknown_preset_fail() {
    let o = basket(&["simulate"]);
    assert!(!o.status.success());
    let o = basket(&["simulate", "--preset", "nope"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("paper-4arm"));
}

#[test]
fn table_over_preset_scenarios_has_eight_blocks_of_five() {
    // The four-arm preset with sampler, grid and replicate counts cut down.
    let text = PAPER_4ARM
        .replace("burn_in = 2000", "burn_in = 100")
        .replace("kept_draws = 10000", "kept_draws = 1000")
        .replace("v0_points = 8", "v0_points = 1")
        .replace("sigma0_sq_points = 10", "sigma0_sq_points = 1")
        .replace("reps_per_point = 1000", "reps_per_point = 4")
        .replace("refine_top = 3", "refine_top = 0")
        .replace("search_kept_draws = 2000", "search_kept_draws = 1000")
        .replace("search_burn_in = 500", "search_burn_in = 100")
        .replace("n_reps = 5000", "n_reps = 10")
        .replace("calibrate = true", "calibrate = false");
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = basket(&["oc-table", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(out.join("oc_table.txt")).unwrap();
    let truth_rows = table.lines().filter(|l| l.contains("truth")).count();
    assert_eq!(truth_rows, 8, "{table}");
    for design in ["Independent", "BHM", "OBHM", "COBHM", "AOBHM"] {
        let rows = table
            .lines()
            .filter(|l| l.split_whitespace().any(|w| w == design))
            .count();
        assert_eq!(rows, 8, "{design}\n{table}");
    }
    let scenario2 = table.lines().find(|l| l.starts_with("2 ")).unwrap();
    assert_eq!(scenario2.matches('*').count(), 4, "{scenario2}");
    let scenario7 = table.lines().find(|l| l.starts_with("7 ")).unwrap();
    assert_eq!(scenario7.matches('*').count(), 1, "{scenario7}");
}
