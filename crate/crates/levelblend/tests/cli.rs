//! End-to-end command-line checks: exit codes, diagnostics, and the
//! bit-reproducibility contract of the --seed flag.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levelblend"))
}

fn fixture(game: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(game)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn levelblend")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn ingest_is_deterministic_and_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.corpus");
    let b = dir.path().join("b.corpus");
    let input = fixture("loderunner");
    let out = run(&["ingest", "--game", "loderunner", "--input", input.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("24 segments"));
    ok(&["ingest", "--game", "loderunner", "--input", input.to_str().unwrap(), "--out", b.to_str().unwrap()]);
    assert_eq!(read(&a), read(&b));
}

#[test]
fn ingest_rejects_unknown_tiles_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let levels = dir.path().join("levels");
    std::fs::create_dir(&levels).unwrap();
    std::fs::write(levels.join("bad.txt"), "..Z.\n....\n").unwrap();
    let out = run(&[
        "ingest",
        "--game",
        "loderunner",
        "--input",
        levels.to_str().unwrap(),
        "--out",
        dir.path().join("x.corpus").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "diagnostic missing: {stderr}");
    assert!(stderr.contains('Z'), "tile not named: {stderr}");
}

#[test]
fn seeded_training_and_assembly_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("lr.corpus");
    ok(&[
        "ingest", "--game", "loderunner",
        "--input", fixture("loderunner").to_str().unwrap(),
        "--out", corpus.to_str().unwrap(),
    ]);

    let train = |out: &Path, seed: &str| {
        ok(&[
            "train", "--corpus", corpus.to_str().unwrap(),
            "--latent", "3", "--epochs", "8", "--hidden", "24,16",
            "--seed", seed, "--out", out.to_str().unwrap(),
        ]);
    };
    let m1 = dir.path().join("m1.ckpt");
    let m2 = dir.path().join("m2.ckpt");
    let m3 = dir.path().join("m3.ckpt");
    train(&m1, "42");
    train(&m2, "42");
    train(&m3, "43");
    assert_eq!(read(&m1), read(&m2));
    assert_ne!(read(&m1), read(&m3));

    let assemble = |out: &Path, seed: &str| {
        ok(&[
            "assemble", "--model", m1.to_str().unwrap(),
            "--steps-min", "3", "--steps-max", "7",
            "--seed", seed, "--out", out.to_str().unwrap(),
        ]);
    };
    let l1 = dir.path().join("l1.txt");
    let l2 = dir.path().join("l2.txt");
    assemble(&l1, "7");
    assemble(&l2, "7");
    assert_eq!(read(&l1), read(&l2));

    // seed via environment variable instead of flag
    let l3 = dir.path().join("l3.txt");
    let status = bin()
        .env("LEVELBLEND_SEED", "7")
        .args([
            "assemble", "--model", m1.to_str().unwrap(),
            "--steps-min", "3", "--steps-max", "7",
            "--out", l3.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(read(&l1), read(&l3));

    // generated segments are reproducible too
    let g1 = dir.path().join("g1");
    let g2 = dir.path().join("g2");
    for g in [&g1, &g2] {
        ok(&[
            "generate", "--model", m1.to_str().unwrap(),
            "--label", "0,1,0,1", "--count", "3",
            "--seed", "5", "--out", g.to_str().unwrap(),
        ]);
    }
    for i in 0..3 {
        let name = format!("seg_{i:03}.txt");
        assert_eq!(read(&g1.join(&name)), read(&g2.join(&name)));
    }
}

#[test]
fn generate_rejects_wrong_label_width() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("lr.corpus");
    ok(&[
        "ingest", "--game", "loderunner",
        "--input", fixture("loderunner").to_str().unwrap(),
        "--out", corpus.to_str().unwrap(),
    ]);
    let model = dir.path().join("m.ckpt");
    ok(&[
        "train", "--corpus", corpus.to_str().unwrap(),
        "--latent", "2", "--epochs", "1", "--hidden", "8",
        "--out", model.to_str().unwrap(),
    ]);
    let out = run(&[
        "generate", "--model", model.to_str().unwrap(),
        "--label", "0,1,0,1,1", "--out", dir.path().join("g").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn config_file_supplies_seed_and_flag_overrides_it() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("lr.corpus");
    ok(&[
        "ingest", "--game", "loderunner",
        "--input", fixture("loderunner").to_str().unwrap(),
        "--out", corpus.to_str().unwrap(),
    ]);
    let cfg = dir.path().join("defaults.toml");
    std::fs::write(&cfg, "seed = 42\n").unwrap();

    let t = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "train", "--corpus", corpus.to_str().unwrap(),
            "--latent", "2", "--epochs", "3", "--hidden", "8",
            "--config", cfg.to_str().unwrap(),
            "--out", out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        ok(&args);
    };
    let from_file = dir.path().join("file.ckpt");
    let from_flag42 = dir.path().join("flag42.ckpt");
    let from_flag43 = dir.path().join("flag43.ckpt");
    t(&from_file, &[]);
    t(&from_flag42, &["--seed", "42"]);
    t(&from_flag43, &["--seed", "43"]);
    assert_eq!(read(&from_file), read(&from_flag42));
    assert_ne!(read(&from_file), read(&from_flag43));
}

#[test]
fn assemble_single_model_probability_one() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("lr.corpus");
    ok(&[
        "ingest", "--game", "loderunner",
        "--input", fixture("loderunner").to_str().unwrap(),
        "--out", corpus.to_str().unwrap(),
    ]);
    let model = dir.path().join("m.ckpt");
    ok(&[
        "train", "--corpus", corpus.to_str().unwrap(),
        "--latent", "2", "--epochs", "1", "--hidden", "8",
        "--out", model.to_str().unwrap(),
    ]);
    let level = dir.path().join("level.txt");
    ok(&[
        "assemble",
        "--model", model.to_str().unwrap(),
        "--model", model.to_str().unwrap(),
        "--probs", "1.0,0.0",
        "--steps-min", "3", "--steps-max", "5",
        "--seed", "2", "--out", level.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&level).unwrap();
    // every placement names the first model
    for line in text.lines().filter(|l| l.starts_with("@ ")) {
        assert!(line.contains("loderunner#0"), "line {line:?}");
    }
}
