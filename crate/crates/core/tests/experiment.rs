mod common;

use std::fs;

use common::shift;
use ogf::datagen::{self, SyntheticConfig};
use ogf::experiment::{
    read_runs, run_experiment, summarize, validate_bounds, write_bundle, write_summary,
    AuditConfig, DataSource, ExperimentConfig, LearnerKind,
};
use ogf::learners::{batch_solve, pretrain, project_ball};

fn data(n0: usize, t_total: usize) -> DataSource {
    DataSource::Synthetic(SyntheticConfig {
        n0,
        t_total,
        ..SyntheticConfig::default()
    })
}

fn small(learners: Vec<LearnerKind>) -> ExperimentConfig {
    ExperimentConfig {
        data: data(30, 80),
        learners,
        eta_grid: vec![1e-3, 1e-2],
        mu_grid: vec![1e-4, 1e-2],
        order_grid: vec![1, 3],
        batch_mu_grid: vec![1e-2, 1.0],
        pretrain_mu_grid: vec![1e-2, 1.0],
        realizations: 2,
        seed: 17,
        ..ExperimentConfig::default()
    }
}

#[test]
fn single_configuration_yields_one_summary_row() {
    let cfg = ExperimentConfig {
        eta_grid: vec![1e-2],
        mu_grid: vec![1e-3],
        order_grid: vec![3],
        realizations: 1,
        ..small(vec![LearnerKind::Dogf])
    };
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.summary.len(), 1);
    assert_eq!(result.summary[0].learner, LearnerKind::Dogf);
    assert_eq!(result.summary[0].runs, 1);
    assert_eq!(result.summary[0].std_test_nrmse, 0.0);
}

#[test]
fn every_learner_has_one_selected_run_per_realization() {
    let result = run_experiment(&small(LearnerKind::ALL.to_vec())).unwrap();
    assert_eq!(result.summary.len(), LearnerKind::ALL.len());
    for r in &result.realizations {
        for kind in LearnerKind::ALL {
            let selected = r
                .rows
                .iter()
                .filter(|row| row.learner == kind && row.selected)
                .count();
            assert_eq!(selected, 1, "{kind} in realization {}", r.realization);
            assert!(r
                .rows
                .iter()
                .filter(|row| row.learner == kind)
                .all(|row| row.order == r.order || kind == LearnerKind::Dogf));
        }
        assert!(r.selected(LearnerKind::Batch).unwrap().train_regret.abs() <= 1e-12);
        let trace = r.trace(LearnerKind::Dogf).unwrap();
        assert!(
            (trace.regret.last().unwrap() - r.selected(LearnerKind::Dogf).unwrap().train_regret)
                .abs()
                <= 1e-15
        );
    }
}

#[test]
fn reruns_write_identical_bundles() {
    let cfg = small(vec![
        LearnerKind::Pretrained,
        LearnerKind::Batch,
        LearnerKind::Dogf,
        LearnerKind::Sogf,
    ]);
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_bundle(&run_experiment(&cfg).unwrap(), d1.path()).unwrap();
    write_bundle(&run_experiment(&cfg).unwrap(), d2.path()).unwrap();
    for name in [
        "summary.csv",
        "runs.csv",
        "regret.csv",
        "cumulative_regret.csv",
        "eta_sweep.csv",
        "order_sweep.csv",
    ] {
        assert_eq!(
            fs::read(d1.path().join(name)).unwrap(),
            fs::read(d2.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let other = ExperimentConfig { seed: 18, ..cfg };
    let d3 = tempfile::tempdir().unwrap();
    write_bundle(&run_experiment(&other).unwrap(), d3.path()).unwrap();
    assert_ne!(
        fs::read(d1.path().join("runs.csv")).unwrap(),
        fs::read(d3.path().join("runs.csv")).unwrap()
    );
}

#[test]
fn summary_recomputes_from_emitted_runs() {
    let result = run_experiment(&small(vec![
        LearnerKind::Pretrained,
        LearnerKind::Batch,
        LearnerKind::Dogf,
    ]))
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&result, dir.path()).unwrap();
    let rows = read_runs(dir.path().join("runs.csv")).unwrap();
    assert_eq!(rows, result.rows().cloned().collect::<Vec<_>>());
    assert_eq!(summarize(&rows), result.summary);

    let again = tempfile::tempdir().unwrap();
    write_summary(&summarize(&rows), again.path()).unwrap();
    for name in ["summary.csv", "regret.csv"] {
        assert_eq!(
            fs::read(dir.path().join(name)).unwrap(),
            fs::read(again.path().join(name)).unwrap()
        );
    }
    assert!(dir.path().join("steps").join("dogf_r000.csv").exists());
}

/// A frozen learner's regret is the mean loss gap between the pre-trained
/// filter and the hindsight filter, and the bound (infinite initial term)
/// still dominates.
#[test]
fn frozen_learner_audit_measures_the_pretrained_gap() {
    let cfg = AuditConfig {
        data: SyntheticConfig {
            n0: 30,
            t_total: 60,
            ..SyntheticConfig::default()
        },
        eta: 0.0,
        realizations: 2,
        ..AuditConfig::default()
    };
    let report = validate_bounds(&cfg).unwrap();
    assert_eq!(report.violation_count(), 0);
    for run in &report.runs {
        let stream = datagen::generate(&SyntheticConfig {
            seed: run.seed,
            ..cfg.data.clone()
        })
        .unwrap();
        let h0 = pretrain(
            stream.base_graph(),
            stream.base_signal(),
            cfg.order,
            cfg.pretrain_mu,
        )
        .unwrap();
        let radius = cfg.ball_scale * h0.norm();

        let mut g = stream.base_graph().clone();
        let mut sm = shift(&g, stream.base_signal().values(), cfg.order);
        let (mut rows, mut targets) = (Vec::new(), Vec::new());
        for r in stream.records() {
            rows.push(sm.transpose_apply_sparse(&r.attachment).unwrap());
            targets.push(r.value);
            g.expand(&r.attachment).unwrap();
            sm.extend(&g, &r.attachment, r.value).unwrap();
        }
        let t = rows.len() as f64;
        let h_star = batch_solve(&rows, &targets, 2.0 * t * cfg.mu).unwrap();
        let h_star = project_ball(h_star.coeffs(), radius);
        let loss = |h: &[f64], g: &[f64], x: f64| {
            0.5 * (g.iter().zip(h).map(|(a, b)| a * b).sum::<f64>() - x).powi(2)
                + cfg.mu * h.iter().map(|v| v * v).sum::<f64>()
        };
        let gap: f64 = rows
            .iter()
            .zip(&targets)
            .map(|(g, &x)| loss(h0.coeffs(), g, x) - loss(&h_star, g, x))
            .sum::<f64>()
            / t;
        let last = run.audit.rows.last().unwrap();
        assert!((last.regret - gap).abs() <= 1e-10 * gap.abs().max(1.0));
        assert!(last.bound.is_infinite());
    }
}
