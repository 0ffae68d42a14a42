//! End-to-end runs of the `bmsim` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bmsim::config::sha256_hex;
use bmsim::experiments::{AbandonRow, BlockRow, SummaryRow, Table2Row, ValidateRow};
use bmsim::output::{read_csv, Manifest};
use serde::Serialize;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn bmsim(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmsim"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("bmsim runs")
}

fn ok(args: &[&str], out: &Path) -> String {
    let o = bmsim(args, out);
    assert!(
        o.status.success(),
        "bmsim {args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn reserialize<T: Serialize>(rows: &[T]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

#[test]
fn golden_files_round_trip() {
    let abandon: Vec<AbandonRow> = read_csv(&fixture("abandon.csv")).unwrap();
    assert_eq!(reserialize(&abandon), read(&fixture("abandon.csv")));
    let table2: Vec<Table2Row> = read_csv(&fixture("table2_20.csv")).unwrap();
    assert_eq!(reserialize(&table2), read(&fixture("table2_20.csv")));
    for f in ["fig4_summary.csv", "fig5_summary.csv"] {
        let rows: Vec<SummaryRow> = read_csv(&fixture(f)).unwrap();
        assert_eq!(reserialize(&rows), read(&fixture(f)));
    }
    let blocks: Vec<BlockRow> = read_csv(&fixture("blocks_honest_10.csv")).unwrap();
    assert_eq!(blocks.len(), 1200);
    assert_eq!(reserialize(&blocks), read(&fixture("blocks_honest_10.csv")));
}

#[test]
fn deterministic_outputs_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["abandon-check"], out);
    assert_eq!(read(&out.join("abandon.csv")), read(&fixture("abandon.csv")));
    ok(&["fig4"], out);
    assert_eq!(read(&out.join("fig4_summary.csv")), read(&fixture("fig4_summary.csv")));
    ok(&["fig5"], out);
    assert_eq!(read(&out.join("fig5_summary.csv")), read(&fixture("fig5_summary.csv")));
}

#[test]
fn seeded_outputs_match_golden() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["table2", "--trials", "20"], out);
    assert_eq!(read(&out.join("table2.csv")), read(&fixture("table2_20.csv")));
    ok(
        &[
            "gen-blocks",
            "--fraction",
            "0.1",
            "--behavior",
            "honest",
            "--blocks",
            "1200",
        ],
        out,
    );
    assert_eq!(read(&out.join("blocks.csv")), read(&fixture("blocks_honest_10.csv")));
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config("table2.toml");
    let args = [
        "table2",
        "--config",
        cfg.to_str().unwrap(),
        "--trials",
        "12",
        "--seed",
        "99",
    ];
    ok(&args, a.path());
    ok(&args, b.path());
    assert_eq!(read(&a.path().join("table2.csv")), read(&b.path().join("table2.csv")));
    let c = tempfile::tempdir().unwrap();
    ok(&["table2", "--trials", "12", "--seed", "100"], c.path());
    assert_ne!(read(&a.path().join("table2.csv")), read(&c.path().join("table2.csv")));
}

#[test]
fn manifest_describes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("abandon.toml");
    ok(
        &["abandon-check", "--config", cfg.to_str().unwrap(), "--seed", "7"],
        dir.path(),
    );
    let m = Manifest::read(dir.path()).unwrap();
    assert_eq!(m.command, "abandon-check");
    assert_eq!(m.config_sha256, sha256_hex(&std::fs::read(&cfg).unwrap()));
    assert_eq!(m.seed, 7);
    assert_eq!(m.schema_version, 1);
    assert!(m.wall_time_s >= 0.0);
    assert!(!m.git_revision.is_empty());
    assert_eq!(m.outputs.len(), 1);
    assert_eq!(m.outputs[0].file, "abandon.csv");
    assert_eq!(m.outputs[0].schema, "abandon/v1");
    assert_eq!(m.outputs[0].rows, 4);
}

#[test]
fn every_shipped_config_parses() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let c = bmsim::ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            assert!(c.config.kind.is_some(), "{}", p.display());
            let defaults = bmsim::ExperimentConfig {
                kind: c.config.kind,
                out: c.config.out.clone(),
                ..Default::default()
            };
            assert_eq!(c.config, defaults, "{} drifts from the reference values", p.display());
            n += 1;
        }
    }
    assert_eq!(n, 8);
}

#[test]
fn validate_honest_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("validate.toml");
    let blocks = fixture("blocks_honest_10.csv");
    let stdout = ok(
        &[
            "validate",
            "--config",
            cfg.to_str().unwrap(),
            "--blocks",
            blocks.to_str().unwrap(),
            "--fraction",
            "0.1",
        ],
        dir.path(),
    );
    assert!(stdout.contains("verdict: valid (0 of 201 windows failed)"), "{stdout}");
    let rows: Vec<ValidateRow> = read_csv(&dir.path().join("validate.csv")).unwrap();
    assert_eq!(rows.len(), 201);
    assert!(rows.iter().all(|r| r.passed));
    assert_eq!(rows.first().unwrap().window_end, 1000);
    assert_eq!(rows.last().unwrap().window_end, 1200);
}

#[test]
fn validate_short_range_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(
        &[
            "gen-blocks",
            "--fraction",
            "0.5",
            "--behavior",
            "short-range",
            "--blocks",
            "5000",
        ],
        out,
    );
    let blocks = out.join("blocks.csv");
    let stdout = ok(&["validate", "--blocks", blocks.to_str().unwrap()], out);
    assert!(stdout.contains("verdict: invalid"), "{stdout}");
    let rows: Vec<ValidateRow> = read_csv(&out.join("validate.csv")).unwrap();
    let last = rows.last().unwrap();
    assert_eq!(last.window_end, 5000);
    assert!(!last.passed);
    assert!(last.p_short < 1e-12);
}

fn failing(args: &[&str]) -> (i32, String) {
    let dir = tempfile::tempdir().unwrap();
    let o = bmsim(args, dir.path());
    (o.status.code().unwrap(), String::from_utf8(o.stderr).unwrap())
}

#[test]
fn malformed_blocks_name_the_row() {
    let p = fixture("blocks_malformed.csv");
    let (code, err) = failing(&["validate", "--blocks", p.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("row 3"), "{err}");
    let p = fixture("blocks_missing_column.csv");
    let (code, err) = failing(&["validate", "--blocks", p.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("avg_difficulty"), "{err}");
}

#[test]
fn too_few_blocks_is_a_data_error() {
    let p = fixture("blocks_honest_10.csv");
    let (code, err) = failing(&["validate", "--blocks", p.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("need 5000"), "{err}");
}

#[test]
fn config_errors_exit_1() {
    let p = fixture("bad_type.toml");
    let (code, err) = failing(&["table2", "--config", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2") && err.contains("mu"), "{err}");

    let p = fixture("bad_value.toml");
    let (code, err) = failing(&["fig3", "--config", p.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("grid_step_s"), "{err}");

    let (code, err) = failing(&["table2", "--config", "/nonexistent/x.toml"]);
    assert_eq!(code, 1, "{err}");

    let cfg = config("fig4.toml");
    let (code, err) = failing(&["fig5", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("fig4") && err.contains("fig5"), "{err}");

    let (code, err) = failing(&["validate", "--blocks", "/nonexistent/blocks.csv"]);
    assert_eq!(code, 1, "{err}");
    let (code, err) = failing(&["validate"]);
    assert_eq!(code, 1, "{err}");

    let (code, err) = failing(&["gen-blocks", "--fraction", "0.001"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn validate_blocks_path_from_config_is_relative_to_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("blocks_honest_10.csv"), dir.path().join("b.csv")).unwrap();
    let cfg = dir.path().join("v.toml");
    std::fs::write(
        &cfg,
        "kind = \"validate\"\n[validate]\nblocks = \"b.csv\"\nfraction = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let stdout = ok(&["validate", "--config", cfg.to_str().unwrap()], &out);
    assert!(stdout.contains("verdict: valid"), "{stdout}");
}

#[test]
fn honest_control_never_detected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("f3.toml");
    std::fs::write(
        &cfg,
        "kind = \"fig3\"\n[detection]\nduration_s = 2592000.0\ngrid_step_s = 86400.0\n",
    )
    .unwrap();
    ok(
        &["fig3", "--config", cfg.to_str().unwrap(), "--trials", "10"],
        dir.path(),
    );
    let rows: Vec<bmsim::experiments::Fig3Row> = read_csv(&dir.path().join("fig3.csv")).unwrap();
    assert_eq!(rows.len(), 4 * 3 * 31);
    for r in rows.iter().filter(|r| r.attack == "honest") {
        assert_eq!(r.detection_probability, 0.0, "{r:?}");
    }
    for r in rows
        .iter()
        .filter(|r| r.attack == "short-range" && r.hash_fraction == 0.5)
    {
        assert!(r.detection_probability >= 0.99, "{r:?}");
    }
}
