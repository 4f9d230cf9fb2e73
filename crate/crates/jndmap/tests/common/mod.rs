#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn jndmap() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_jndmap"));
    c.env_remove("JNDMAP_SEED");
    c
}

pub fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Simulates `n` contents into `dir/corpus` and returns that directory.
pub fn small_corpus(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, format!(r#"{{"n_contents": {n}, "seed": {seed}}}"#)).unwrap();
    let corpus = dir.join("corpus");
    ok(jndmap().args(["simulate", "--spec"]).arg(&spec).arg("--out").arg(&corpus).output().unwrap());
    corpus
}

pub fn run(corpus: &Path, out: &Path, extra: &[&str]) -> Output {
    jndmap().arg("run").arg("--corpus").arg(corpus).arg("--out").arg(out).args(extra).output().unwrap()
}
