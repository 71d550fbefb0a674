use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use onebit_irs::channel::ChannelDump;
use onebit_irs::harness::{ExperimentConfig, CSV_COLUMNS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_onebit-irs"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn onebit-irs");
    assert!(
        out.status.success(),
        "onebit-irs {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_config(dir: &Path) -> String {
    let cfg = r#"{
        "antennas": 4,
        "elements": 2,
        "users": 2,
        "slots": 3,
        "noise_grid_db": [10, 20],
        "n_channels": 3,
        "ao": { "max_outer": 2 }
    }"#;
    let path = dir.join("small.json");
    fs::write(&path, cfg).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_csv_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("ber.csv");
    let timing = dir.path().join("timing.txt");
    let res = run(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--schemes",
        "onebit-md,zf-quant-noirs",
        "--timing-out",
        timing.to_str().unwrap(),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("onebit-md,10,"));
    assert!(rows[3].starts_with("zf-quant-noirs,20,"));
    let report = fs::read_to_string(&timing).unwrap();
    assert!(report.contains("onebit-md"));
    assert!(String::from_utf8_lossy(&res.stderr).contains("mean runtime"));
}

#[test]
fn seed_and_thread_overrides_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = |name: &str, threads: &str, seed: &str| {
        let out = dir.path().join(name);
        run(&[
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
            "--seed",
            seed,
            "--deterministic-csv",
        ]);
        fs::read(out).unwrap()
    };
    let a = csv("a.csv", "1", "5");
    let b = csv("b.csv", "3", "5");
    let c = csv("c.csv", "1", "6");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn unknown_scheme_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("x.csv");
    let res = bin()
        .args([
            "run",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--schemes",
            "onebit-gemm",
        ])
        .output()
        .unwrap();
    assert!(!res.status.success());
    assert!(!out.exists());
}

#[test]
fn fixture_dump_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let path = dir.path().join("ch.json");
    run(&[
        "fixtures",
        "dump",
        "--config",
        &cfg,
        "--channel",
        "2",
        "--out",
        path.to_str().unwrap(),
    ]);
    let dump = ChannelDump::from_json(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!((dump.antennas, dump.elements, dump.users), (4, 2, 2));
    assert_eq!(dump.channels.direct.len(), 2);

    let stdout = run(&["fixtures", "dump", "--config", &cfg, "--channel", "2"]).stdout;
    let again = ChannelDump::from_json(&String::from_utf8(stdout).unwrap()).unwrap();
    assert_eq!(dump, again);
}

#[test]
fn default_config_parses_back() {
    let stdout = run(&["default-config"]).stdout;
    let cfg = ExperimentConfig::from_json(&String::from_utf8(stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());
}
