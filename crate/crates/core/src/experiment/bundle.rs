use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::runner::{ExperimentResult, SeriesPoint};
use super::LearnerKind;
use crate::error::Result;
use crate::learners::write_step_records;

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REGRET_FILE: &str = "regret.csv";
pub const CUMULATIVE_REGRET_FILE: &str = "cumulative_regret.csv";
pub const ETA_SWEEP_FILE: &str = "eta_sweep.csv";
pub const ORDER_SWEEP_FILE: &str = "order_sweep.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const STEPS_DIR: &str = "steps";

/// One grid run. Fixed filters report `eta = 0`; `mu` is their own
/// regularization. Metrics are NaN when the run diverged before the end.
///
/// Regret is against the selected batch filter of the realization, with
/// every loss taken at `μ = 0`; the selected batch row therefore has zero
/// regret.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub realization: usize,
    pub learner: LearnerKind,
    pub order: usize,
    pub eta: f64,
    pub mu: f64,
    pub selection_nrmse: f64,
    pub test_nrmse: f64,
    /// Normalized regret at the end of the train prefix.
    pub train_regret: f64,
    pub diverged: bool,
    pub selected: bool,
}

/// Aggregate over the selected run of each realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub learner: LearnerKind,
    /// Realizations with a usable selected run.
    pub runs: usize,
    /// Realizations whose whole grid diverged; excluded from the statistics.
    pub diverged: usize,
    pub mean_test_nrmse: f64,
    pub std_test_nrmse: f64,
    pub mean_train_regret: f64,
    pub std_train_regret: f64,
}

/// Mean and sample standard deviation (zero for a single value, NaN for none).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Summary rows in canonical learner order, built from selected rows only.
pub fn summarize(rows: &[RunRow]) -> Vec<SummaryRow> {
    LearnerKind::ALL
        .into_iter()
        .filter_map(|learner| {
            let mut selected: Vec<&RunRow> = rows
                .iter()
                .filter(|r| r.selected && r.learner == learner)
                .collect();
            if selected.is_empty() {
                return None;
            }
            selected.sort_by_key(|r| r.realization);
            let usable: Vec<&RunRow> = selected.iter().copied().filter(|r| !r.diverged).collect();
            let nrmse: Vec<f64> = usable.iter().map(|r| r.test_nrmse).collect();
            let regret: Vec<f64> = usable.iter().map(|r| r.train_regret).collect();
            let (mean_test_nrmse, std_test_nrmse) = mean_std(&nrmse);
            let (mean_train_regret, std_train_regret) = mean_std(&regret);
            Some(SummaryRow {
                learner,
                runs: usable.len(),
                diverged: selected.len() - usable.len(),
                mean_test_nrmse,
                std_test_nrmse,
                mean_train_regret,
                std_train_regret,
            })
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_runs(path: impl AsRef<Path>) -> Result<Vec<RunRow>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    Ok(reader
        .deserialize()
        .collect::<std::result::Result<Vec<RunRow>, _>>()?)
}

/// Writes `summary.csv` (error table) and `regret.csv` (regret table).
pub fn write_summary(summary: &[SummaryRow], dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_rows(&dir.join(SUMMARY_FILE), summary)?;
    #[derive(Serialize)]
    struct RegretRow {
        learner: LearnerKind,
        runs: usize,
        mean_train_regret: f64,
        std_train_regret: f64,
    }
    write_rows(
        &dir.join(REGRET_FILE),
        summary.iter().map(|s| RegretRow {
            learner: s.learner,
            runs: s.runs,
            mean_train_regret: s.mean_train_regret,
            std_train_regret: s.std_train_regret,
        }),
    )
}

#[derive(Serialize)]
struct SweepRow {
    realization: usize,
    learner: LearnerKind,
    order: usize,
    eta: f64,
    mu: f64,
    selection_nrmse: f64,
    test_nrmse: f64,
}

fn sweep_rows<'a>(
    result: &'a ExperimentResult,
    pick: impl Fn(&'a super::RealizationResult) -> &'a [SeriesPoint] + 'a,
) -> impl Iterator<Item = SweepRow> + 'a {
    result.realizations.iter().flat_map(move |r| {
        pick(r).iter().map(move |p| SweepRow {
            realization: r.realization,
            learner: p.learner,
            order: p.order,
            eta: p.eta,
            mu: p.mu,
            selection_nrmse: p.selection_nrmse,
            test_nrmse: p.test_nrmse,
        })
    })
}

/// Writes the full result bundle into `dir`.
pub fn write_bundle(result: &ExperimentResult, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_rows(&dir.join(RUNS_FILE), result.rows())?;
    write_summary(&result.summary, dir)?;

    #[derive(Serialize)]
    struct RegretPoint {
        learner: LearnerKind,
        realization: usize,
        t: usize,
        normalized_regret: f64,
    }
    write_rows(
        &dir.join(CUMULATIVE_REGRET_FILE),
        result.realizations.iter().flat_map(|r| {
            r.traces.iter().flat_map(move |trace| {
                trace
                    .regret
                    .iter()
                    .enumerate()
                    .map(move |(i, &v)| RegretPoint {
                        learner: trace.learner,
                        realization: r.realization,
                        t: i + 1,
                        normalized_regret: v,
                    })
            })
        }),
    )?;
    write_rows(
        &dir.join(ETA_SWEEP_FILE),
        sweep_rows(result, |r| &r.eta_sweep),
    )?;
    write_rows(
        &dir.join(ORDER_SWEEP_FILE),
        sweep_rows(result, |r| &r.order_sweep),
    )?;

    if result.config.write_steps {
        let steps = dir.join(STEPS_DIR);
        fs::create_dir_all(&steps)?;
        for r in &result.realizations {
            for trace in &r.traces {
                let name = format!("{}_r{:03}.csv", trace.learner, r.realization);
                write_step_records(&trace.records, steps.join(name))?;
            }
        }
    }

    let manifest = serde_json::json!({
        "config": result.config,
        "realizations": result
            .realizations
            .iter()
            .map(|r| serde_json::json!({"realization": r.realization, "seed": r.seed, "order": r.order}))
            .collect::<Vec<_>>(),
    });
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(realization: usize, learner: LearnerKind, test: f64, diverged: bool) -> RunRow {
        RunRow {
            realization,
            learner,
            order: 3,
            eta: 0.1,
            mu: 0.0,
            selection_nrmse: test,
            test_nrmse: test,
            train_regret: test / 10.0,
            diverged,
            selected: true,
        }
    }

    #[test]
    fn summary_excludes_diverged_but_counts_them() {
        let rows = vec![
            row(0, LearnerKind::Dogf, 0.1, false),
            row(1, LearnerKind::Dogf, 0.3, false),
            row(2, LearnerKind::Dogf, f64::NAN, true),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 1);
        assert_eq!((s[0].runs, s[0].diverged), (2, 1));
        assert!((s[0].mean_test_nrmse - 0.2).abs() < 1e-15);
        assert!((s[0].std_test_nrmse - 0.02f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn runs_csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![
            row(0, LearnerKind::Sogf, 1.0 / 3.0, false),
            row(1, LearnerKind::Batch, f64::NAN, true),
        ];
        let path = dir.path().join(RUNS_FILE);
        write_rows(&path, &rows).unwrap();
        let back = read_runs(&path).unwrap();
        assert_eq!(back[0], rows[0]);
        assert!(back[1].test_nrmse.is_nan() && back[1].diverged);
    }
}
