use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use levelset_core::audit::{audit, IntervalRecord, RollUp};
use levelset_core::{Exec, Simplex};

use crate::config::{self, AuditConfig};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, read_jsonl, write_json, write_jsonl};

#[derive(Debug, Serialize)]
pub struct ConsistencyReport {
    pub chi: Vec<f64>,
    pub tol: f64,
    pub bins: Vec<f64>,
    pub sets: BTreeMap<String, RollUp>,
}

fn check_name(name: &str) -> CliResult<()> {
    if name.is_empty()
        || !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
    {
        return Err(CliError::Config(format!(
            "set name {name:?} must be alphanumeric"
        )));
    }
    Ok(())
}

/// Audits named record sets and writes per-point records plus the report.
pub fn audit_sets(
    exec: Exec,
    sets: &BTreeMap<String, Vec<IntervalRecord>>,
    chi: &Simplex,
    tol: f64,
    bins: &[f64],
    out: &Path,
) -> CliResult<ConsistencyReport> {
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Config(format!(
            "tol must be non-negative, got {tol}"
        )));
    }
    let mut report = ConsistencyReport {
        chi: chi.weights().to_vec(),
        tol,
        bins: bins.to_vec(),
        sets: BTreeMap::new(),
    };
    for (name, records) in sets {
        check_name(name)?;
        let rep = audit(exec, records, chi, tol, bins)?;
        write_jsonl(&out.join(format!("audit_{name}.jsonl")), &rep.records)?;
        report.sets.insert(name.clone(), rep.summary);
    }
    write_json(&out.join("audit_report.json"), &report)?;
    Ok(report)
}

pub fn run(cfg_path: &Path, out: &Path, exec: Exec) -> CliResult<()> {
    let (cfg, base): (AuditConfig, _) = config::load(cfg_path)?;
    let chi = config::chi(&cfg.chi)?;
    if cfg.sets.is_empty() {
        return Err(CliError::Config("no interval sets given".into()));
    }
    for name in cfg.sets.keys() {
        check_name(name)?;
    }
    let mut sets = BTreeMap::new();
    for (name, p) in &cfg.sets {
        let records: Vec<IntervalRecord> = read_jsonl(&config::resolve(&base, p))?;
        if let Some(r) = records.iter().find(|r| r.matrix.len() != chi.len()) {
            return Err(CliError::Data(format!(
                "set {name}: record at {:?} has {} classes, chi has {}",
                r.r,
                r.matrix.len(),
                chi.len()
            )));
        }
        sets.insert(name.clone(), records);
    }
    ensure_dir(out)?;
    let report = audit_sets(exec, &sets, &chi, cfg.tol, &cfg.bins, out)?;
    for (name, s) in &report.sets {
        eprintln!(
            "{name}: {} points, {} inconsistent",
            s.total, s.inconsistent
        );
    }
    Ok(())
}
