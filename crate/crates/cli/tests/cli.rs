use std::path::Path;
use std::process::{Command, Output};

fn blend_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blend-sim"))
        .args(args)
        .output()
        .expect("spawn blend-sim")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_into(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--file-size", "256KB", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    blend_sim(&args)
}

#[test]
fn run_writes_metrics_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into(dir.path(), &["--mode", "blend", "--bi", "15", "--trace"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains("blend"));
    for f in ["channel.log", "producer_trace.log", "cwnd.log"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn csv_is_reproducible_across_processes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let flags = ["--profile", "80211n", "--algo", "cubic", "--seed", "9"];
    assert!(run_into(a.path(), &flags).status.success());
    assert!(run_into(b.path(), &flags).status.success());
    let read = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn unfinished_scenario_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    std::fs::write(&cfg, "deadline_s = 1\nfile_size = \"10MB\"\n").unwrap();
    let o = blend_sim(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("did not complete"), "{}", stderr(&o));
    // The partial row is still written.
    assert!(dir.path().join("metrics.csv").exists());
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "mode = \"blend\"\nbi = 0\n").unwrap();
    let o = blend_sim(&["show-config", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error:"));

    let o = blend_sim(&["run", "--loss-script", "random:2.0", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());

    let o = blend_sim(&["run", "--profile", "80211g"]);
    assert!(!o.status.success());
}

#[test]
fn show_config_round_trips() {
    let o = blend_sim(&["show-config", "--profile", "80211n", "--bi", "10", "--gamma", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let toml = String::from_utf8(o.stdout).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("shown.toml");
    std::fs::write(&cfg, &toml).unwrap();
    let again = blend_sim(&["show-config", "--config", cfg.to_str().unwrap()]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(String::from_utf8(again.stdout).unwrap(), toml);
    assert!(toml.contains("mode = \"blend\""));
}

#[test]
fn bi_sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = blend_sim(&[
        "sweep",
        "--axis",
        "bi",
        "--values",
        "0,5,15",
        "--file-size",
        "256KB",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("default"));
    assert!(rows[2].contains("blend"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = blend_sim(&["show-config", "--config", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", path.display(), stderr(&o));
        seen += 1;
    }
    assert!(seen > 0);
}
