use std::path::Path;
use std::process::{Command, Output};

use dgmorl_core::demo::DemoRepository;
use dgmorl_core::envs::{DstEnv, DstMap};

fn dgmorl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dgmorl")).args(args).current_dir(dir).env_remove("DGMORL_SEEDS").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

const LOCK: &str = "seeds = [2, 7, 15]\noutput_dir = \"out\"\n[env]\nkind = \"lock\"\nhorizon = 3\n[curriculum]\nmax_steps = 400\neval_period = 100\n";

#[test]
fn malformed_config_exits_2_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "seeds = [1]\n\n[learner]\nalpha = \"fast\"\n");
    let out = dgmorl(&["run", "bad.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4"), "{err}");
}

#[test]
fn run_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "lock.toml", LOCK);
    let out = dgmorl(&["run", "lock.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in [2, 7, 15] {
        assert!(tmp.path().join(format!("out/seed-{s}/metrics.log")).is_file());
    }
    let out = dgmorl(&["report", "out", "--out", "rep"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("rep/eu_summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "step,mean,min,max,n");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("100,") && lines[1].ends_with(",3"));
    assert!(tmp.path().join("rep/eu_tidy.csv").is_file());
    assert!(tmp.path().join("rep/eu_table.txt").is_file());
}

#[test]
fn overrides_reach_the_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "lock.toml", LOCK);
    let out = Command::new(env!("CARGO_BIN_EXE_dgmorl"))
        .args(["run", "lock.toml"])
        .current_dir(tmp.path())
        .env("DGMORL_SEEDS", "[5]")
        .env("DGMORL_CURRICULUM__EVAL_PERIOD", "200")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let snap = std::fs::read_to_string(tmp.path().join("out/seed-5/config.toml")).unwrap();
    assert!(snap.contains("# override DGMORL_CURRICULUM__EVAL_PERIOD=200"));
    let metrics = std::fs::read_to_string(tmp.path().join("out/seed-5/metrics.log")).unwrap();
    assert_eq!(metrics.lines().filter(|l| l.starts_with("eval ")).count(), 2);
}

#[test]
fn mismatched_eval_periods_fail_report() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "a.toml", &LOCK.replace("\"out\"", "\"a\"").replace("[2, 7, 15]", "[2]"));
    write(tmp.path(), "b.toml", &LOCK.replace("\"out\"", "\"b\"").replace("[2, 7, 15]", "[2]").replace("eval_period = 100", "eval_period = 200"));
    assert!(dgmorl(&["run", "a.toml"], tmp.path()).status.success());
    assert!(dgmorl(&["run", "b.toml"], tmp.path()).status.success());
    let out = dgmorl(&["report", "a", "b"], tmp.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("evaluates at steps"));
}

#[test]
fn oracle_and_demo_generation() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "dst.toml", "");
    let out = dgmorl(&["oracle", "dst.toml"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("ccs ")).count(), 10);
    assert_eq!(text.lines().filter(|l| l.starts_with("corner ")).count(), 11);

    let out = dgmorl(&["gen-demos", "dst.toml", "--quality", "low", "--count", "2", "--out", "low.txt"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut env = DstEnv::new(DstMap::bundled(), 100, 0.99).unwrap();
    let repo = DemoRepository::load(&tmp.path().join("low.txt"), Some(&mut env)).unwrap();
    assert_eq!(repo.demos().len(), 2);

    let out = dgmorl(&["gen-demos", "dst.toml", "--count", "11", "--out", "x.txt"], tmp.path());
    assert!(!out.status.success());

    write(tmp.path(), "big.toml", "[env]\nmap = \"big.toml.map\"\n");
    let mut rows: Vec<String> = (0..100).map(|_| format!("\"{}\"", ".".repeat(100))).collect();
    rows[0] = format!("\"S{}\"", ".".repeat(99));
    let map = format!("name = \"big\"\ngrid = [{}]\ntreasures = [{{ row = 99, col = 99, value = 1.0 }}]\n", rows.join(","));
    write(tmp.path(), "big.toml.map", &map);
    let out = dgmorl(&["oracle", "big.toml"], tmp.path());
    assert!(!out.status.success());
}
