#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_reviewmine");

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pipeline")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub const FULL_RUN: &[&[&str]] = &[
    &["ingest"],
    &["quantify", "--mock-llm", "mock_llm.json"],
    &["aggregate"],
    &["analyze"],
    &["train"],
    &["predict"],
    &["genre-influence"],
    &["report"],
];

#[derive(Debug)]
pub struct Run {
    pub code: i32,
    pub summary: Value,
    pub stderr: String,
}

/// A private copy of the fixture with `pipeline.toml` at its root.
pub struct Workspace {
    pub dir: tempfile::TempDir,
}

impl Workspace {
    pub fn new() -> Workspace {
        let dir = tempfile::tempdir().unwrap();
        copy_tree(&fixture_dir(), dir.path());
        Workspace { dir }
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn out(&self) -> PathBuf {
        self.path().join("out")
    }

    pub fn run(&self, args: &[&str]) -> Run {
        self.run_env(args, &[])
    }

    pub fn run_env(&self, args: &[&str], env: &[(&str, &str)]) -> Run {
        let mut cmd = Command::new(BIN);
        cmd.current_dir(self.path()).arg("--config").arg("pipeline.toml").args(args);
        for var in ["QUANT_ENDPOINT", "QUANT_MODEL", "QUANT_API_KEY", "RUST_LOG"] {
            cmd.env_remove(var);
        }
        for (k, v) in env {
            cmd.env(k, v);
        }
        run(cmd)
    }

    pub fn full_run(&self) -> Vec<Run> {
        FULL_RUN.iter().map(|args| self.run(args)).collect()
    }
}

pub fn run(mut cmd: Command) -> Run {
    let out = cmd.output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().collect();
    let summary = match lines.as_slice() {
        [one] => serde_json::from_str(one).unwrap_or_else(|e| panic!("bad summary line {one:?}: {e}")),
        _ => Value::Null,
    };
    Run { code: out.status.code().unwrap_or(-1), summary, stderr: String::from_utf8_lossy(&out.stderr).into_owned() }
}

pub fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let target = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_tree(&entry.path(), &target);
        } else {
            fs::copy(entry.path(), target).unwrap();
        }
    }
}

/// Relative path to contents for every file below `root`.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    if root.is_dir() {
        walk(root, root, &mut out);
    }
    out
}

/// Differences between two trees, one line per file.
pub fn tree_diff(expected: &BTreeMap<String, Vec<u8>>, actual: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut diffs = Vec::new();
    for (name, bytes) in expected {
        match actual.get(name) {
            None => diffs.push(format!("missing {name}")),
            Some(b) if b != bytes => diffs.push(format!("differs {name}")),
            Some(_) => {}
        }
    }
    for name in actual.keys().filter(|k| !expected.contains_key(*k)) {
        diffs.push(format!("unexpected {name}"));
    }
    diffs
}

/// Compares `out` with the committed golden tree, or rewrites the golden
/// tree when `UPDATE_GOLDEN` is set.
pub fn check_golden(out: &Path) -> Vec<String> {
    let actual = read_tree(out);
    let golden = golden_dir();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        let _ = fs::remove_dir_all(&golden);
        copy_tree(out, &golden);
        return Vec::new();
    }
    tree_diff(&read_tree(&golden), &actual)
}
