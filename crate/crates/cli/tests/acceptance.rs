//! CLI acceptance: every subcommand run twice on identical inputs yields
//! byte-identical stdout and artifacts, and the exit-code contract holds
//! (0 success, 1 usage, 2 input/parse, 3 validation failure).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_orgminer");

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("orgminer-accept-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn orgminer")
}

/// Runs the invocation twice and asserts stdout, stderr and every artifact
/// in `artifacts` came out byte-identical. Returns the first run's stdout.
fn assert_deterministic(args: &[&str], artifacts: &[&Path]) -> Vec<u8> {
    let first = run(args);
    assert!(
        first.status.success(),
        "orgminer {args:?} failed: {}",
        String::from_utf8_lossy(&first.stderr)
    );
    let first_artifacts: Vec<Vec<u8>> =
        artifacts.iter().map(|p| fs::read(p).expect("artifact")).collect();

    let second = run(args);
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout, "stdout drift: orgminer {args:?}");
    assert_eq!(first.stderr, second.stderr, "stderr drift: orgminer {args:?}");
    for (path, bytes) in artifacts.iter().zip(&first_artifacts) {
        assert_eq!(
            &fs::read(path).expect("artifact"),
            bytes,
            "artifact drift: {} after orgminer {args:?}",
            path.display()
        );
    }
    first.stdout
}

#[test]
fn criterion_8_every_subcommand_is_deterministic() {
    let dir = scratch("determinism");
    let crisis = fixture("crisis.csv");
    let crisis = crisis.to_str().unwrap();
    let config = fixture("gen-config.json");
    let spec = fixture("filter-spec.json");

    // generate: flat and tree artifacts from the same config.
    let gen_flat = dir.join("gen.csv");
    let gen_tree = dir.join("gen.json");
    assert_deterministic(
        &["generate", "--config", config.to_str().unwrap(), "--out", gen_flat.to_str().unwrap()],
        &[&gen_flat],
    );
    assert_deterministic(
        &["generate", "--config", config.to_str().unwrap(), "--out", gen_tree.to_str().unwrap(), "--format", "tree"],
        &[&gen_tree],
    );

    // convert: flat -> tree -> flat reproduces the original bytes.
    let conv_tree = dir.join("conv.json");
    let conv_flat = dir.join("conv.csv");
    assert_deterministic(
        &["convert", "--in", gen_flat.to_str().unwrap(), "--out", conv_tree.to_str().unwrap()],
        &[&conv_tree],
    );
    assert_deterministic(
        &["convert", "--in", conv_tree.to_str().unwrap(), "--out", conv_flat.to_str().unwrap()],
        &[&conv_flat],
    );
    assert_eq!(fs::read(&gen_flat).unwrap(), fs::read(&conv_flat).unwrap());

    // filter
    let filtered = dir.join("filtered.csv");
    assert_deterministic(
        &["filter", "--log", gen_flat.to_str().unwrap(), "--spec", spec.to_str().unwrap(), "--out", filtered.to_str().unwrap()],
        &[&filtered],
    );

    // validate
    assert_deterministic(&["validate", "--log", crisis], &[]);

    // mine-protocols (records and pretty)
    let protocols = dir.join("protocols.ndjson");
    assert_deterministic(
        &["mine-protocols", "--log", crisis, "--out", protocols.to_str().unwrap()],
        &[&protocols],
    );
    assert_deterministic(&["mine-protocols", "--log", crisis, "--pretty"], &[]);

    // mine-orgstruct with DOT artifact, plus --per-process
    let verdicts = dir.join("structures.ndjson");
    let dot = dir.join("interaction.dot");
    assert_deterministic(
        &["mine-orgstruct", "--log", gen_flat.to_str().unwrap(), "--out", verdicts.to_str().unwrap(), "--dot", dot.to_str().unwrap()],
        &[&verdicts, &dot],
    );
    assert_deterministic(&["mine-orgstruct", "--log", crisis, "--per-process"], &[]);

    // mine-info, stats, agr, summary
    assert_deterministic(&["mine-info", "--log", gen_flat.to_str().unwrap()], &[]);
    assert_deterministic(&["stats", "--log", gen_flat.to_str().unwrap()], &[]);
    let agr = dir.join("agr.dot");
    assert_deterministic(
        &["agr", "--log", gen_flat.to_str().unwrap(), "--out", agr.to_str().unwrap()],
        &[&agr],
    );
    assert_deterministic(&["summary", "--log", crisis], &[]);

    println!("criterion 8 (subcommand determinism): pass");
}

#[test]
fn summary_reports_the_crisis_overview() {
    let out = run(&["summary", "--log", fixture("crisis.csv").to_str().unwrap()]);
    assert!(out.status.success());
    let line: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(line["record"], "summary");
    assert_eq!(line["data"]["processes"], 1);
    assert_eq!(line["data"]["cases"], 1);
    assert_eq!(line["data"]["events"], 10);
    assert_eq!(line["data"]["actors"], 5);
    assert_eq!(line["data"]["performatives"], 7);
}

#[test]
fn exit_code_contract() {
    // 0: success
    assert_eq!(
        run(&["validate", "--log", fixture("crisis.csv").to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    // 0: help is not a usage error
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    // 1: usage errors
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["summary"]).status.code(), Some(1)); // missing --log
    // 2: input/parse errors
    assert_eq!(
        run(&["summary", "--log", fixture("no-such-file.csv").to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    // 3: validation failure, with the violation still reported on stdout
    let out = run(&["validate", "--log", fixture("self-message.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"severity\":\"error\""));
}

#[test]
fn pipeline_recovers_the_configured_structure() {
    let dir = scratch("pipeline");
    let log = dir.join("market.csv");
    let gen = run(&[
        "generate",
        "--config",
        fixture("gen-config.json").to_str().unwrap(),
        "--out",
        log.to_str().unwrap(),
    ]);
    assert!(gen.status.success());
    let mined = run(&["mine-orgstruct", "--log", log.to_str().unwrap()]);
    assert!(mined.status.success());
    let stdout = String::from_utf8(mined.stdout).unwrap();
    let verdicts: Vec<serde_json::Value> = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .filter(|v: &serde_json::Value| v["record"] == "structure-verdict")
        .collect();
    assert!(!verdicts.is_empty());
    for v in verdicts {
        assert_eq!(v["data"]["label"], "market");
    }
}

#[test]
fn inputs_are_never_mutated() {
    let dir = scratch("immutability");
    let copy = dir.join("crisis.csv");
    fs::copy(fixture("crisis.csv"), &copy).unwrap();
    let before = fs::read(&copy).unwrap();
    for args in [
        vec!["validate", "--log", copy.to_str().unwrap()],
        vec!["summary", "--log", copy.to_str().unwrap()],
        vec!["mine-protocols", "--log", copy.to_str().unwrap()],
        vec!["stats", "--log", copy.to_str().unwrap()],
    ] {
        assert!(run(&args).status.success());
        assert_eq!(fs::read(&copy).unwrap(), before, "{args:?} mutated its input");
    }
}
