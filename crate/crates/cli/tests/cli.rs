use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lcmgap_cli::{config_to_toml, load_config, run, EXIT_ASSERTION, EXIT_USAGE, EXIT_VALIDATION};

const SMALL: &str = r#"
seed = 5

[model]
kind = "regression"
family = "linear"
intercept = 2.0
slope = 1.0
sigma = 1.0

[experiment]
n = 200
replications = 50
p = 1.0
t = 0.5

[reference]
truncation = 4.0
step = 0.01
replications = 200
cov_truncation = 4.0
cov_replications = 200
s_max = 2.0
s_step = 0.25
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn lcmgap(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lcmgap"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

#[test]
fn constants_for_regression_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = lcmgap(&["constants"], Some(&cfg), &dir.path().join("out"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("c1 = 0.793701"), "{text}");
    assert!(text.contains("c2 = 1.58740"), "{text}");
}

#[test]
fn lcm_of_four_points() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "pts.csv", "t,value\n0,0\n1,1\n2,1\n3,3\n");
    let out_dir = dir.path().join("out");
    let out = lcmgap(&["lcm", "--input", input.to_str().unwrap()], None, &out_dir);
    assert!(out.status.success());
    let gaps = fs::read_to_string(out_dir.join("gap.csv")).unwrap();
    assert_eq!(gaps, "t,value\n0.0,0.0\n1.0,0.0\n2.0,1.0\n3.0,0.0\n");
    assert!(out_dir.join("manifest.json").exists());
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(lcmgap(&["clt"], Some(&cfg), &a).status.success());
    assert!(lcmgap(&["clt"], Some(&cfg), &b).status.success());
    let ra = fs::read(a.join("rows.jsonl")).unwrap();
    assert!(!ra.is_empty());
    assert_eq!(ra, fs::read(b.join("rows.jsonl")).unwrap());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["subcommand"], "clt");
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["config"]["experiment"]["n"], 200);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(lcmgap(&["tails", "--seed", "6"], Some(&cfg), &a).status.success());
    assert!(lcmgap(&["tails"], Some(&cfg), &b).status.success());
    assert_ne!(
        fs::read(a.join("rows.jsonl")).unwrap(),
        fs::read(b.join("rows.jsonl")).unwrap()
    );
}

#[test]
fn invalid_configs_fail_fast() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (SMALL.replace("p = 1.0", "p = 6.0\nq = 6.0"), "1 <= p < min(q, 2q - 7)"),
        (SMALL.replace("sigma = 1.0", "sigma = 0.0"), "sigma"),
        (SMALL.replace("n = 200\n", ""), "missing field `n`"),
        (SMALL.replace("slope = 1.0", "slope = -1.0"), "A1"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{i}.toml"), text);
        let out_dir = dir.path().join(format!("out{i}"));
        let out = lcmgap(&["clt"], Some(&cfg), &out_dir);
        assert_eq!(out.status.code(), Some(EXIT_VALIDATION), "case {i}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains(needle), "case {i}: {err}");
        assert!(!out_dir.exists(), "case {i}: nothing should be written");
    }
}

#[test]
fn regression_noise_must_be_positive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &SMALL.replace("sigma = 1.0", "sigma = 0.0"));
    assert!(load_config(&cfg).is_err());
}

#[test]
fn constant_weight_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[weight]\nkind = \"constant\"\nvalue = 1.0\n");
    let cfg = write(dir.path(), "c.toml", &text);
    assert!(load_config(&cfg).is_ok());
}

#[test]
fn config_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["density.toml", "density_clt.toml", "regression.toml", "determinism.toml"] {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
        let (cfg, _) = load_config(&path).unwrap();
        let again = write(dir.path(), name, &config_to_toml(&cfg).unwrap());
        let (cfg2, _) = load_config(&again).unwrap();
        assert_eq!(cfg, cfg2, "{name}");
    }
}

#[test]
fn usage_errors() {
    assert_eq!(run(["lcmgap", "frobnicate"]), EXIT_USAGE);
    assert_eq!(run(["lcmgap"]), EXIT_USAGE);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(["lcmgap", "clt", "--out", out.to_str().unwrap()]), EXIT_USAGE);
}

#[test]
fn assert_flag_reports_failed_checks() {
    let dir = tempfile::tempdir().unwrap();
    // A reversed d-grid makes the monotonicity check fail.
    let text = SMALL
        .replace("kind = \"regression\"", "kind = \"density\"")
        .replace("intercept = 2.0", "intercept = 1.5")
        .replace("sigma = 1.0\n", "")
        .replace("t = 0.5", "t = 0.5\nd_grid = [4.0, 0.5]");
    let cfg = write(dir.path(), "c.toml", &text);
    let out_dir = dir.path().join("out");
    let out = lcmgap(&["localization", "--assert"], Some(&cfg), &out_dir);
    assert_eq!(out.status.code(), Some(EXIT_ASSERTION));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "checks_failed");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "checks_failed");
    // Without --assert the same run exits cleanly.
    let out = lcmgap(&["localization"], Some(&cfg), &dir.path().join("out2"));
    assert!(out.status.success());
}

#[test]
fn zeta_cov_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out_dir = dir.path().join("out");
    assert!(lcmgap(&["zeta-cov"], Some(&cfg), &out_dir).status.success());
    let csv = fs::read_to_string(out_dir.join("cov.csv")).unwrap();
    assert!(csv.starts_with("s,cov,se\n0,"));
    assert_eq!(csv.lines().count(), 10);
}
