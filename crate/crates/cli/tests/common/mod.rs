#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stderr: String,
}

pub fn run(cmd: &str, config: &Path, out: &Path, jobs: Option<usize>) -> Run {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levelset-uq"));
    c.arg(cmd).arg("--config").arg(config).arg("--out").arg(out);
    if let Some(j) = jobs {
        c.arg("--jobs").arg(j.to_string());
    }
    let o = c.output().expect("binary runs");
    Run {
        code: o.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

pub fn run_ok(cmd: &str, config: &Path, out: &Path, jobs: Option<usize>) {
    let r = run(cmd, config, out, jobs);
    assert_eq!(r.code, 0, "{cmd} failed: {}", r.stderr);
}

pub fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

pub fn support(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/support")
        .join(name)
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn python_ok() -> bool {
    Command::new("python3")
        .args(["-c", "import jsonschema, referencing"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Checks files against a published schema; skipped without python3 and
/// jsonschema.
pub fn validate(schema: &str, files: &[&Path]) {
    if !python_ok() {
        eprintln!("python3 with jsonschema not found; skipping schema check for {schema}");
        return;
    }
    let o = Command::new("python3")
        .arg(support("validate.py"))
        .arg(manifest_dir().join("schemas"))
        .arg(schema)
        .args(files)
        .output()
        .unwrap();
    assert!(
        o.status.success(),
        "{schema}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn read_jsonl(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

pub fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

/// Three well-separated planar clusters, `n` points each, labels 1..=3.
pub fn cluster_csv(n: usize) -> String {
    let centres = [(0.0, 1.5), (0.0, -1.5), (1.5, 0.0)];
    let mut s = String::from("x1,x2,label\n");
    for i in 0..n {
        for (c, (cx, cy)) in centres.iter().enumerate() {
            let t = (i * 3 + c) as f64;
            let dx = 0.6 * (t * 0.7).sin();
            let dy = 0.6 * (t * 1.3).cos();
            s.push_str(&format!("{},{},{}\n", cx + dx, cy + dy, c + 1));
        }
    }
    s
}
