#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Output {
    /// The run directory announced on the last stdout line.
    pub fn run_dir(&self) -> PathBuf {
        let line = self.stdout.lines().rev().find_map(|l| l.strip_prefix("run directory: "));
        PathBuf::from(line.unwrap_or_else(|| panic!("no run directory in output:\n{}\n{}", self.stdout, self.stderr)))
    }
}

pub fn rjcma(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_rjcma")).args(args).output().expect("spawn rjcma");
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Like [`rjcma`] but panics unless the exit code is zero.
pub fn ok(args: &[&str]) -> Output {
    let out = rjcma(args);
    assert_eq!(out.code, 0, "rjcma {args:?} failed:\n{}\n{}", out.stdout, out.stderr);
    out
}

pub fn config(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Relative path and bytes of every file below `dir`, sorted.
pub fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort();
    out
}
