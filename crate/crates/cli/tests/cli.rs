use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn abacode(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abacode"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn error_json(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    let line = stderr.lines().last().unwrap();
    serde_json::from_str(line).unwrap()
}

/// The template with a small stream so runs finish quickly.
fn write_small_config(dir: &Path) {
    let out = abacode(&["gen-config", "--out", "exp.toml"], dir);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.join("exp.toml"))
        .unwrap()
        .replace("rounds = 20000", "rounds = 300")
        .replace("pretrain_count = 2000", "pretrain_count = 200")
        .replace("online_count = 20000", "online_count = 300")
        .replace("batch_size = 1000", "batch_size = 100")
        .replace("dim = 32", "dim = 8")
        .replace("epochs = 20", "epochs = 2")
        .replace("epochs = 5", "epochs = 1");
    fs::write(dir.join("exp.toml"), text).unwrap();
}

#[test]
fn gen_config_prints_the_template() {
    let dir = tempfile::tempdir().unwrap();
    let out = abacode(&["gen-config"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("[[variants]]") && text.contains("kind = \"compression\""));
}

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    write_small_config(dir.path());
    let out = abacode(
        &[
            "run",
            "--config",
            "exp.toml",
            "--seed",
            "5",
            "--out",
            "res",
            "--variant",
            "cb",
            "--variant",
            "oe",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = stdout.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("cb,5,") && rows[2].starts_with("oe,5,"));
    for f in [
        "summary.csv",
        "curves.csv",
        "rounds/cb_seed5.csv",
        "rounds/oe_seed5.csv",
    ] {
        assert!(dir.path().join("res").join(f).exists(), "{f}");
    }

    let out = abacode(
        &[
            "compare",
            "--config",
            "exp.toml",
            "--seed",
            "5",
            "--out",
            "res",
            "--variant",
            "cb",
            "--variant",
            "oe",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ranking = fs::read_to_string(dir.path().join("res/ranking.csv")).unwrap();
    assert_eq!(ranking.lines().count(), 3);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), ranking);
}

#[test]
fn rounds_flag_overrides_the_file() {
    let dir = tempfile::tempdir().unwrap();
    write_small_config(dir.path());
    let out = abacode(
        &[
            "run",
            "--config",
            "exp.toml",
            "--seed",
            "1",
            "--rounds",
            "7",
            "--variant",
            "ue",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let log = fs::read_to_string(dir.path().join("runs/rounds/ue_seed1.csv")).unwrap();
    assert_eq!(log.lines().count(), 2 + 7);
}

#[test]
fn pretrained_snapshots_reproduce_inline_runs() {
    let dir = tempfile::tempdir().unwrap();
    write_small_config(dir.path());
    let common = [
        "--config",
        "exp.toml",
        "--seed",
        "2",
        "--variant",
        "me",
        "--variant",
        "compression",
    ];
    let inline = abacode(
        &[&["run"][..], &common, &["--out", "a"]].concat(),
        dir.path(),
    );
    assert!(inline.status.success());
    let pre = abacode(
        &[&["pretrain"][..], &common, &["--snapshot", "snaps"]].concat(),
        dir.path(),
    );
    assert!(
        pre.status.success(),
        "{}",
        String::from_utf8_lossy(&pre.stderr)
    );
    assert!(dir.path().join("snaps/me_seed2/clusters.bin").exists());
    let resumed = abacode(
        &[
            &["run"][..],
            &common,
            &["--out", "b", "--snapshot", "snaps"],
        ]
        .concat(),
        dir.path(),
    );
    assert!(resumed.status.success());
    assert_eq!(inline.stdout, resumed.stdout);
    for f in [
        "summary.csv",
        "rounds/me_seed2.csv",
        "rounds/compression_seed2.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn config_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    write_small_config(dir.path());
    let out = abacode(
        &["run", "--config", "exp.toml", "--rounds", "0"],
        dir.path(),
    );
    assert!(!out.status.success());
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "config");
    assert_eq!(err["error"]["field"], "run.rounds");

    let out = abacode(
        &["run", "--config", "exp.toml", "--variant", "nope"],
        dir.path(),
    );
    assert_eq!(error_json(&out)["error"]["field"], "variant");

    let text = fs::read_to_string(dir.path().join("exp.toml")).unwrap();
    fs::write(
        dir.path().join("bad.toml"),
        text.replace("gamma = 0.1", "gamma = 1.5"),
    )
    .unwrap();
    let out = abacode(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(error_json(&out)["error"]["field"], "bandit.gamma");
}

#[test]
fn other_failures_report_their_kind() {
    let dir = tempfile::tempdir().unwrap();
    let out = abacode(&["run", "--config", "absent.toml"], dir.path());
    assert!(!out.status.success());
    assert_eq!(error_json(&out)["error"]["kind"], "io");

    write_small_config(dir.path());
    let out = abacode(&["compare", "--config", "exp.toml"], dir.path());
    assert_eq!(error_json(&out)["error"]["kind"], "missing_run");

    let out = abacode(&["run", "--bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "usage");
}
