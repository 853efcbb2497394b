use std::path::Path;
use std::process::{Command, Output};

fn wsnsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wsnsim"))
        .args(args)
        .output()
        .unwrap()
}

fn configs() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn frame_hex_dump() {
    let o = wsnsim(&["frame", "--payload", "01"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("bits      73"), "{s}");
    assert!(s.contains("hex       aae7e7e7e7e7"), "{s}");
}

#[test]
fn frame_rejects_bad_input() {
    assert!(!wsnsim(&["frame", "--payload", "0"]).status.success());
    assert!(!wsnsim(&["frame", "--address", "E7E7"]).status.success());
    let too_long = "00".repeat(33);
    let o = wsnsim(&["frame", "--payload", &too_long]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("wsnsim:"));
}

#[test]
fn fsl_csv_on_stdout() {
    let o = wsnsim(&["fsl"]);
    assert!(o.status.success());
    let s = stdout(&o);
    let mut lines = s.lines();
    assert_eq!(
        lines.next(),
        Some("range_m,fsl_formula_db,fsl_published_db,delta_db")
    );
    assert_eq!(s.lines().count(), 11);
}

#[test]
fn stochastic_runs_need_a_seed() {
    let o = wsnsim(&["per"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    assert!(!wsnsim(&["simulate"]).status.success());
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "experiment = \"per_sweep\"\nseed = 1\n[per]\npacket_counts = [10]\n",
    )
    .unwrap();
    let o = wsnsim(&["simulate", "--config", path.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("allow_any_count"));

    std::fs::write(&path, "experiment = \"nonsense\"\nseed = 1\n").unwrap();
    assert!(!wsnsim(&["simulate", "--config", path.to_str().unwrap()])
        .status
        .success());
    assert!(!wsnsim(&["simulate", "--config", "/no/such/file.toml"])
        .status
        .success());
}

#[test]
fn lifetime_writes_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("life.csv");
    let cfg = configs().join("default.toml");
    let o = wsnsim(&[
        "lifetime",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("0.06342619"));
    let main = std::fs::read_to_string(&out).unwrap();
    assert!(main.starts_with("quantity,computed,published,delta,unit,note\n"));
    assert!(dir.path().join("life.levels.csv").exists());
    assert!(dir.path().join("life.phases.csv").exists());
}

#[test]
fn seed_override_changes_per_rows() {
    let cfg = configs().join("range_sweep.toml");
    let a = stdout(&wsnsim(&[
        "per",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
    ]));
    let b = stdout(&wsnsim(&[
        "per",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "2",
    ]));
    let c = stdout(&wsnsim(&[
        "per",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "1",
    ]));
    assert_ne!(a, b);
    assert_eq!(a, c);
}

#[test]
fn summary_flag_suppresses_csv() {
    let s = stdout(&wsnsim(&["curve", "--summary"]));
    assert!(s.starts_with("BER/PER curves"));
    assert!(!s.contains("ber,size_bits,per"));
}
