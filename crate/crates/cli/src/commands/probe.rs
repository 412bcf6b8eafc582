use std::path::Path;

use serde::Serialize;

use levelset_core::audit::IntervalRecord;
use levelset_core::external::SubprocessClassifier;
use levelset_core::oracle::OracleClassifier;
use levelset_core::par::map_slice;
use levelset_core::probing::{
    probe_point, probe_point_refined, MonotoneClassifier, PrevalenceGrid,
};
use levelset_core::training::{FamilySet, PairwiseFamily};
use levelset_core::Exec;

use crate::config::{self, ClassifierSource, ProbeConfig};
use crate::error::{CliError, CliResult};
use crate::io::{ensure_dir, read_points, write_json, write_jsonl, PointTable};

#[derive(Debug, Serialize)]
pub struct ProbeSummary {
    pub points: usize,
    pub classes: usize,
    pub grid_size: usize,
    pub refine_iters: usize,
    pub total_violations: usize,
    pub points_with_violations: usize,
}

pub fn build_classifier(
    src: &ClassifierSource,
    base: &Path,
) -> CliResult<Box<dyn MonotoneClassifier>> {
    Ok(match src {
        ClassifierSource::Oracle { densities, tie } => Box::new(OracleClassifier::new(
            config::densities_or_default(densities, base)?,
            tie.rule(),
        )),
        ClassifierSource::Checkpoint { paths } => {
            if paths.is_empty() {
                return Err(CliError::Config("checkpoint source lists no files".into()));
            }
            let fams = paths
                .iter()
                .map(|p| {
                    let p = config::resolve(base, p);
                    PairwiseFamily::load(&p)
                        .map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
                })
                .collect::<CliResult<Vec<_>>>()?;
            Box::new(FamilySet::new(fams).map_err(|e| CliError::Data(e.to_string()))?)
        }
        ClassifierSource::Subprocess {
            program,
            args,
            classes,
        } => {
            if *classes < 2 {
                return Err(CliError::Config(
                    "subprocess classifier needs at least 2 classes".into(),
                ));
            }
            Box::new(SubprocessClassifier::spawn(program, args, *classes)?)
        }
    })
}

/// Probes every point of `table`, attaching its label when present.
pub fn probe_table(
    exec: Exec,
    clf: &dyn MonotoneClassifier,
    table: &PointTable,
    grid: &PrevalenceGrid,
    refine_iters: usize,
) -> CliResult<Vec<IntervalRecord>> {
    let exec = exec.restrict(clf.is_concurrent());
    let probes = map_slice(exec, &table.points, |r| {
        if refine_iters > 0 {
            probe_point_refined(clf, r, grid, refine_iters)
        } else {
            probe_point(clf, r, grid)
        }
    });
    probes
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let label = table.labels.as_ref().map(|l| l[i]);
            Ok(IntervalRecord::from_probe(
                table.points[i].clone(),
                &p?,
                label,
            ))
        })
        .collect()
}

pub fn summarize(
    records: &[IntervalRecord],
    classes: usize,
    grid: &PrevalenceGrid,
    refine_iters: usize,
) -> ProbeSummary {
    ProbeSummary {
        points: records.len(),
        classes,
        grid_size: grid.len(),
        refine_iters,
        total_violations: records.iter().map(|r| r.violations).sum(),
        points_with_violations: records.iter().filter(|r| r.violations > 0).count(),
    }
}

pub fn run(cfg_path: &Path, out: &Path, exec: Exec) -> CliResult<()> {
    let (cfg, base): (ProbeConfig, _) = config::load(cfg_path)?;
    let grid = config::grid_or_default(&cfg.grid)?;
    let points_path = config::resolve(&base, &cfg.points);
    let table = read_points(&points_path)?;
    let clf = build_classifier(&cfg.classifier, &base)?;
    let records = probe_table(exec, clf.as_ref(), &table, &grid, cfg.refine_iters)?;
    ensure_dir(out)?;
    write_jsonl(&out.join("intervals.jsonl"), &records)?;
    let summary = summarize(&records, clf.num_classes(), &grid, cfg.refine_iters);
    write_json(&out.join("probe_summary.json"), &summary)?;
    eprintln!(
        "probed {} points, {} violations",
        summary.points, summary.total_violations
    );
    Ok(())
}
