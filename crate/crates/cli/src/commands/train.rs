use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use levelset_core::probing::unique_pairs;
use levelset_core::training::{
    conjecture_probe, train_pairwise_family, ConjectureReport, FamilySet, TrainSettings,
};
use levelset_core::Exec;

use crate::commands::{audit, probe};
use crate::config::{self, TrainConfig};
use crate::error::{CliError, CliResult};
use crate::io::{dataset, ensure_dir, read_points, write_json, write_jsonl};

#[derive(Debug, Serialize)]
struct CrossingRecord {
    pair: [usize; 2],
    r: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ConjectureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

pub fn run(cfg_path: &Path, out: &Path, exec: Exec) -> CliResult<()> {
    let (cfg, base): (TrainConfig, _) = config::load(cfg_path)?;
    let schedule = config::validate_schedule(&cfg.schedule)?;
    let grid = cfg.grid.build()?;
    let chain_audit = match (&cfg.probe, &cfg.audit) {
        (None, Some(_)) => return Err(CliError::Config("audit requires a probe block".into())),
        (_, Some(a)) => Some(config::chi(&a.chi)?),
        _ => None,
    };
    let data_path = config::resolve(&base, &cfg.dataset);
    let table = read_points(&data_path)?;
    let data = dataset(&table, cfg.classes, &data_path)?;
    let k = data.num_classes();
    let pairs = match &cfg.pairs {
        Some(list) => config::pairs(list, k)?,
        None => unique_pairs(k),
    };
    if cfg.probe.is_some() && pairs.len() != k * (k - 1) / 2 {
        return Err(CliError::Config(
            "probing needs a family for every pair".into(),
        ));
    }
    if let Some(chi) = &chain_audit {
        if chi.len() != k {
            return Err(CliError::Config(format!(
                "audit chi has {} entries for {k} classes",
                chi.len()
            )));
        }
    }
    let settings = TrainSettings {
        scorer: cfg.scorer,
        schedule,
        seed: cfg.seed,
    };
    let ckpt_dir = out.join("checkpoints");
    ensure_dir(&ckpt_dir)?;
    let mut families = Vec::new();
    for &pair in &pairs {
        let fam = train_pairwise_family(exec, &data, pair, &grid, &settings)?;
        let path = ckpt_dir.join(format!("pair_{}_{}.json", pair.0 + 1, pair.1 + 1));
        fam.save(&path)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        eprintln!(
            "trained pair ({}, {}): {} models",
            pair.0 + 1,
            pair.1 + 1,
            fam.members.len()
        );
        families.push(fam);
    }

    if let Some(points) = &cfg.crossings {
        let mut recs = Vec::new();
        for fam in &families {
            for r in points {
                let res = conjecture_probe(fam, r, None);
                let pair = [fam.pair.0 + 1, fam.pair.1 + 1];
                recs.push(match res {
                    Ok(rep) => CrossingRecord {
                        pair,
                        r: r.clone(),
                        report: Some(rep),
                        error: None,
                    },
                    Err(e @ levelset_core::Error::DimensionMismatch { .. }) => return Err(e.into()),
                    Err(e) => CrossingRecord {
                        pair,
                        r: r.clone(),
                        report: None,
                        error: Some(e.to_string()),
                    },
                });
            }
        }
        write_jsonl(&out.join("crossings.jsonl"), &recs)?;
    }

    let Some(pc) = &cfg.probe else { return Ok(()) };
    let pgrid = config::grid_or_default(&pc.grid)?;
    let set = FamilySet::new(families)?;
    let test = read_points(&config::resolve(&base, &pc.points))?;
    let mut sets = BTreeMap::new();
    let test_records = probe::probe_table(exec, &set, &test, &pgrid, pc.refine_iters)?;
    write_jsonl(&out.join("intervals.jsonl"), &test_records)?;
    write_json(
        &out.join("probe_summary.json"),
        &probe::summarize(&test_records, k, &pgrid, pc.refine_iters),
    )?;
    sets.insert("test".to_string(), test_records);
    if pc.include_training {
        let train_records = probe::probe_table(exec, &set, &table, &pgrid, pc.refine_iters)?;
        write_jsonl(&out.join("intervals_train.jsonl"), &train_records)?;
        sets.insert("train".to_string(), train_records);
    }
    if let (Some(a), Some(chi)) = (&cfg.audit, chain_audit) {
        let report = audit::audit_sets(exec, &sets, &chi, a.tol, &a.bins, out)?;
        for (name, s) in &report.sets {
            eprintln!(
                "{name}: {} points, {} inconsistent",
                s.total, s.inconsistent
            );
        }
    }
    Ok(())
}
