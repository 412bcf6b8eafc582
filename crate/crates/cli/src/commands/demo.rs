use std::path::Path;

use serde::Serialize;

use levelset_core::density::prevalence_function;
use levelset_core::density_file::DensityFile;
use levelset_core::multiclass::{construct_label, equivalence_audit, PairwisePrevalenceTable};
use levelset_core::par::map_slice;
use levelset_core::{Exec, Simplex};

use crate::config::{self, DemoConfig};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, num, write_csv, write_json};

#[derive(Debug, Serialize)]
pub struct EquivalenceSummary {
    pub chi: Vec<f64>,
    pub points: usize,
    pub matches: usize,
    pub tie_mismatches: usize,
    pub true_mismatches: usize,
    pub failures: usize,
}

fn coord_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("x{i}")).collect()
}

pub fn run(cfg_path: &Path, out: &Path, exec: Exec) -> CliResult<()> {
    let (cfg, base): (DemoConfig, _) = config::load(cfg_path)?;
    let ds = config::densities_or_default(&cfg.densities, &base)?;
    let k = ds.len();
    let dim = ds[0].dim();
    let chi = match &cfg.chi {
        Some(w) => config::chi(w)?,
        None => Simplex::uniform(k),
    };
    if chi.len() != k {
        return Err(CliError::Config(format!(
            "chi has {} entries for {k} classes",
            chi.len()
        )));
    }
    cfg.raster.validate(dim)?;
    cfg.audit_raster.validate(dim)?;
    let pairs = config::pairs(&cfg.pairs, k)?;
    let tie = cfg.tie.rule();
    ensure_dir(out)?;

    let raster = cfg.raster.points();
    let mut header = coord_header(dim);
    header.extend(pairs.iter().map(|(j, l)| format!("q_{}_{}", j + 1, l + 1)));
    let rows: Vec<Vec<String>> = map_slice(exec, &raster, |r| {
        let mut row: Vec<String> = r.iter().map(|&x| num(x)).collect();
        for &(j, l) in &pairs {
            row.push(
                prevalence_function(&ds, j, l, r)
                    .map(num)
                    .unwrap_or_default(),
            );
        }
        row
    });
    write_csv(&out.join("contours.csv"), &header, &rows)?;

    let table = PairwisePrevalenceTable::exact(ds.clone());
    let labels = map_slice(exec, &raster, |r| construct_label(&table, &chi, r, &tie));
    let mut header = coord_header(dim);
    header.extend(["label", "boundary", "off_support"].map(String::from));
    let mut rows = Vec::with_capacity(raster.len());
    for (r, c) in raster.iter().zip(labels) {
        let c = c?;
        let mut row: Vec<String> = r.iter().map(|&x| num(x)).collect();
        row.push((c.label + 1).to_string());
        row.push(c.boundary.to_string());
        row.push(c.off_support.to_string());
        rows.push(row);
    }
    write_csv(&out.join("label_map.csv"), &header, &rows)?;

    let audit_pts = cfg.audit_raster.points();
    let rep = equivalence_audit(exec, &table, &ds, &chi, &audit_pts, &tie)?;
    let summary = EquivalenceSummary {
        chi: chi.weights().to_vec(),
        points: rep.points,
        matches: rep.matches,
        tie_mismatches: rep.tie_mismatches.len(),
        true_mismatches: rep.true_mismatches.len(),
        failures: rep.failures.len(),
    };
    write_json(&out.join("equivalence.json"), &summary)?;
    if let Ok(desc) = DensityFile::describe(&ds) {
        write_json(&out.join("densities.json"), &desc)?;
    }
    eprintln!(
        "equivalence: {} points, {} true mismatches, {} tie-flagged",
        summary.points, summary.true_mismatches, summary.tie_mismatches
    );
    Ok(())
}
