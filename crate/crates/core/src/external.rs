//! Classifiers running in a child process, spoken to over line-delimited
//! JSON on stdin/stdout.
//!
//! Request: `{"r": [..], "q": [..]}`. Response: `{"label": k}` with `k`
//! 1-based. All requests for one point are written before any response is
//! read.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probing::MonotoneClassifier;
use crate::simplex::Simplex;

#[derive(Serialize)]
struct Request<'a> {
    r: &'a [f64],
    q: &'a [f64],
}

#[derive(Deserialize)]
struct Response {
    label: usize,
}

struct Pipes {
    stdin: BufWriter<ChildStdin>,
    stdout: BufReader<ChildStdout>,
}

pub struct SubprocessClassifier {
    child: Mutex<Child>,
    pipes: Mutex<Pipes>,
    k: usize,
}

impl std::fmt::Debug for SubprocessClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SubprocessClassifier")
            .field("k", &self.k)
            .finish()
    }
}

impl SubprocessClassifier {
    /// Starts `program args..` for a `k`-class problem.
    pub fn spawn(program: &str, args: &[String], k: usize) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot start {program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(SubprocessClassifier {
            child: Mutex::new(child),
            pipes: Mutex::new(Pipes {
                stdin: BufWriter::new(stdin),
                stdout: BufReader::new(stdout),
            }),
            k,
        })
    }

    fn exchange(&self, r: &[f64], qs: &[Simplex]) -> Result<Vec<usize>> {
        let mut pipes = self
            .pipes
            .lock()
            .map_err(|_| Error::Protocol("poisoned pipe".into()))?;
        let io = |e: std::io::Error| Error::Protocol(format!("pipe error: {e}"));
        for q in qs {
            let line = serde_json::to_string(&Request { r, q: q.weights() })?;
            pipes.stdin.write_all(line.as_bytes()).map_err(io)?;
            pipes.stdin.write_all(b"\n").map_err(io)?;
        }
        pipes.stdin.flush().map_err(io)?;
        let mut labels = Vec::with_capacity(qs.len());
        let mut line = String::new();
        for _ in qs {
            line.clear();
            if pipes.stdout.read_line(&mut line).map_err(io)? == 0 {
                return Err(Error::Protocol("classifier closed its output".into()));
            }
            let resp: Response = serde_json::from_str(line.trim())
                .map_err(|e| Error::Protocol(format!("bad response {:?}: {e}", line.trim())))?;
            if resp.label == 0 || resp.label > self.k {
                return Err(Error::Protocol(format!(
                    "label {} outside 1..={}",
                    resp.label, self.k
                )));
            }
            labels.push(resp.label - 1);
        }
        Ok(labels)
    }
}

impl MonotoneClassifier for SubprocessClassifier {
    fn num_classes(&self) -> usize {
        self.k
    }

    fn classify(&self, r: &[f64], q: &Simplex) -> Result<usize> {
        Ok(self.exchange(r, std::slice::from_ref(q))?[0])
    }

    fn classify_batch(&self, r: &[f64], qs: &[Simplex]) -> Result<Vec<usize>> {
        self.exchange(r, qs)
    }

    fn is_concurrent(&self) -> bool {
        false
    }
}

impl Drop for SubprocessClassifier {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
