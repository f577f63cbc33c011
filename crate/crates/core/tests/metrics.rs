mod common;

use common::*;
use ogf::metrics::{
    audit_bound, bound_deterministic, bound_stochastic, normalized_regret, nrmse, spectral_norm_sq,
    uniform_limit_bound, AuditObservation, BoundKind, RegretBoundParams, RegretLedger,
    StochasticSeries,
};
use proptest::prelude::*;
use rand::Rng as _;

fn params() -> RegretBoundParams {
    RegretBoundParams {
        r: 1.5,
        c: 0.8,
        y: 0.6,
        w_h: 0.9,
        m_max: 1.0,
        ball_radius: 4.0,
        eta: 0.05,
        mu: 0.01,
        h_star_sq: 2.5,
    }
}

/// Mean first, then squared deviations around it, then the range.
fn two_pass_nrmse(p: &[f64], x: &[f64]) -> f64 {
    let err: Vec<f64> = p.iter().zip(x).map(|(a, b)| a - b).collect();
    let mean_err = err.iter().sum::<f64>() / err.len() as f64;
    let var = err.iter().map(|e| (e - mean_err).powi(2)).sum::<f64>() / err.len() as f64;
    let mse = var + mean_err * mean_err;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    mse.sqrt() / (sorted[sorted.len() - 1] - sorted[0])
}

#[test]
fn nrmse_matches_two_pass_oracle() {
    let mut rng = rng(31);
    for len in [2, 5, 50, 1000] {
        let x = random_vec(&mut rng, len);
        let p = random_vec(&mut rng, len);
        let got = nrmse(&p, &x).unwrap();
        assert!((got - two_pass_nrmse(&p, &x)).abs() <= 1e-12 * got.max(1.0));
    }
    assert_eq!(nrmse(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
}

#[test]
fn normalized_regret_matches_direct_sums() {
    let mut rng = rng(32);
    let online: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let comparator: Vec<f64> = (0..300).map(|_| rng.random::<f64>()).collect();
    let series = normalized_regret(&online, &comparator).unwrap();
    for t in 1..=300 {
        let direct =
            (online[..t].iter().sum::<f64>() - comparator[..t].iter().sum::<f64>()) / t as f64;
        assert!((series[t - 1] - direct).abs() <= 1e-12);
    }
    let plus_one: Vec<f64> = comparator.iter().map(|c| c + 1.0).collect();
    assert!(normalized_regret(&plus_one, &comparator)
        .unwrap()
        .iter()
        .all(|v| (v - 1.0).abs() <= 1e-12));
    assert!(normalized_regret(&online, &online)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));
    assert!(normalized_regret(&online, &comparator[1..]).is_err());
}

/// Dyadic losses keep every partial sum exact, so the terminal value must
/// equal the closed form bit for bit.
#[test]
fn ledger_terminal_regret_is_exact() {
    let mut rng = rng(33);
    let mut ledger = RegretLedger::new();
    for _ in 0..64 {
        ledger.push(
            f64::from(rng.random_range(0..64u8)) / 8.0,
            f64::from(rng.random_range(0..64u8)) / 8.0,
        );
    }
    let expected =
        (ledger.online().iter().sum::<f64>() - ledger.comparator().iter().sum::<f64>()) / 64.0;
    assert_eq!(ledger.terminal(), expected);
    assert_eq!(
        ledger.cumulative().last().copied().unwrap() / 64.0,
        expected
    );
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > tol {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn deterministic_bound_minimizer_matches_closed_form() {
    for t in [10, 200, 5000] {
        let base = params();
        let eval = |eta: f64| bound_deterministic(&RegretBoundParams { eta, ..base }, t);
        let closed = base.h_star_sq.sqrt() / (base.l_d() * (t as f64).sqrt());
        let numeric = golden_section(eval, 1e-6, 10.0, 1e-12);
        assert!((numeric - closed).abs() <= 1e-6 * closed.max(1.0));
        let mut prev = eval(closed);
        for k in 1..20 {
            let v = eval(closed * (1.0 + 0.5 * f64::from(k)));
            assert!(v > prev);
            prev = v;
        }
    }
    let zero = RegretBoundParams {
        h_star_sq: 0.0,
        ..params()
    };
    let l = zero.l_d();
    assert!((bound_deterministic(&zero, 7) - 0.5 * zero.eta * l * l).abs() <= 1e-15);
}

#[test]
fn stochastic_bound_collapses_without_attachment_mass() {
    let p = RegretBoundParams {
        m_max: 3.0,
        ..params()
    };
    let t = 40;
    let series = StochasticSeries {
        p_sq_norm: vec![0.0; t],
        sigma_bar_sq: vec![0.0; t],
        filter_gap: vec![0.0; t],
    };
    let got = bound_stochastic(&p, &series, t).unwrap().value;
    let (w, y, r, m) = (p.w_h, p.y, p.r, p.m_max);
    let expected = w * w * y * y * m + 2.0 * r * w * y * m.sqrt() + bound_deterministic(&p, t);
    assert!((got - expected).abs() <= 1e-13 * expected);
    assert!(bound_stochastic(&p, &series, t + 1).is_err());
}

/// Under uniform single-edge attachment `‖p_t‖² = 1/N_{t−1}`. The partial sums
/// are bounded by `1/N_0 + log(T+N_0−1) − log N_0`; the form without the
/// leading `1/N_0` fails at every horizon.
#[test]
fn uniform_attachment_mass_has_logarithmic_partial_sums() {
    for n0 in [1usize, 5, 50, 500] {
        let mut partial = 0.0;
        for t in 1..=20_000usize {
            let n = n0 + t - 1;
            let p_sq = (0..n).map(|_| (1.0 / n as f64).powi(2)).sum::<f64>();
            assert!((p_sq - 1.0 / n as f64).abs() <= 1e-12);
            partial += p_sq;
            let log_gap = ((t + n0 - 1) as f64).ln() - (n0 as f64).ln();
            assert!(partial <= 1.0 / n0 as f64 + log_gap + 1e-12);
            assert!(partial > log_gap);
        }
    }
}

/// With one edge per arrival the single-model bound under uniform
/// attachment approaches its large-horizon form.
#[test]
fn stochastic_bound_approaches_uniform_limit() {
    let p = params();
    let (n0, t) = (20usize, 200_000usize);
    let inv: Vec<f64> = (0..t).map(|i| 1.0 / (n0 + i) as f64).collect();
    let series = StochasticSeries {
        p_sq_norm: inv.clone(),
        sigma_bar_sq: inv.iter().map(|q| q * (1.0 - q)).collect(),
        filter_gap: vec![0.01; t],
    };
    let summed = bound_stochastic(&p, &series, t).unwrap().value;
    let limit = uniform_limit_bound(&p, 0.01, t);
    assert!(
        (summed - limit).abs() <= 0.05 * limit,
        "{summed} vs {limit}"
    );
}

/// Largest eigenvalue of `PᵀP` by power iteration.
fn power_spectral_sq(p: &[f64], rows: usize, cols: usize) -> f64 {
    let mut v = vec![1.0; cols];
    let mut lambda = 0.0;
    for _ in 0..5000 {
        let pv: Vec<f64> = (0..rows)
            .map(|i| (0..cols).map(|j| p[i * cols + j] * v[j]).sum())
            .collect();
        let w: Vec<f64> = (0..cols)
            .map(|j| (0..rows).map(|i| p[i * cols + j] * pv[i]).sum())
            .collect();
        lambda = norm(&w) / norm(&v);
        let n = norm(&w);
        v = w.iter().map(|x| x / n).collect();
    }
    lambda
}

#[test]
fn spectral_norm_matches_power_iteration() {
    let mut rng = rng(34);
    for (rows, cols) in [(3, 2), (20, 5), (7, 7)] {
        let p: Vec<f64> = (0..rows * cols).map(|_| rng.random::<f64>()).collect();
        let got = spectral_norm_sq(&p, cols);
        assert!((got - power_spectral_sq(&p, rows, cols)).abs() <= 1e-9 * got);
    }
}

fn observations(rng: &mut common::Rng, t: usize) -> Vec<AuditObservation> {
    (0..t)
        .map(|_| AuditObservation {
            online_loss: rng.random::<f64>(),
            comparator_loss: rng.random::<f64>(),
            residual: rng.random::<f64>(),
            c_norm: rng.random::<f64>(),
            y_norm: rng.random::<f64>(),
            p_sq_norm: rng.random::<f64>(),
            sigma_bar_sq: 0.25 * rng.random::<f64>(),
            p_frob_sq: rng.random::<f64>(),
            p_spec_sq: rng.random::<f64>(),
            p_bar: rng.random::<f64>(),
            filter_gap: rng.random::<f64>(),
        })
        .collect()
}

#[test]
fn audit_rows_use_running_maxima_only() {
    let mut rng = rng(35);
    let obs = observations(&mut rng, 60);
    for kind in [
        BoundKind::Deterministic,
        BoundKind::Stochastic,
        BoundKind::Adaptive,
    ] {
        let full = audit_bound(kind, &params(), &obs).unwrap();
        let mut tampered = obs.clone();
        for o in &mut tampered[30..] {
            o.residual = 100.0;
            o.c_norm = 100.0;
        }
        let partial = audit_bound(kind, &params(), &tampered).unwrap();
        assert_eq!(full.rows[..30], partial.rows[..30]);
        for row in &full.rows {
            let t = row.t;
            let regret = (obs[..t]
                .iter()
                .map(|o| o.online_loss - o.comparator_loss)
                .sum::<f64>())
                / t as f64;
            assert!((row.regret - regret).abs() <= 1e-12);
            assert!((row.bound - row.terms.iter().sum::<f64>()).abs() <= 1e-12 * row.bound);
            assert_eq!(row.slack, row.bound - row.regret);
            assert_eq!(row.terms.len(), kind.term_names().len());
        }
        let r_max = obs[..10].iter().map(|o| o.residual).fold(0.0, f64::max);
        let c_max = obs[..10].iter().map(|o| o.c_norm).fold(0.0, f64::max);
        let at10 = RegretBoundParams {
            r: r_max,
            c: c_max,
            ..params()
        };
        let (init, step) = at10.tail(10);
        let n = full.rows[9].terms.len();
        assert!((full.rows[9].terms[n - 2] - init).abs() <= 1e-12 * init);
        assert!((full.rows[9].terms[n - 1] - step).abs() <= 1e-12 * step.max(1e-300));
    }
}

#[test]
fn audit_csv_has_named_columns() {
    let mut rng = rng(36);
    let audit = audit_bound(BoundKind::Stochastic, &params(), &observations(&mut rng, 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("audit.csv");
    audit.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,regret,bound,bias,cross,variance,drift,init,step,slack"
    );
    assert_eq!(lines.count(), 5);
}

proptest! {
    #[test]
    fn nrmse_is_affine_invariant(seed in any::<u64>(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let mut rng = rng(seed);
        let x = random_vec(&mut rng, 30);
        let p = random_vec(&mut rng, 30);
        let map = |v: &[f64]| v.iter().map(|u| scale * u + shift).collect::<Vec<_>>();
        let base = nrmse(&p, &x).unwrap();
        prop_assert!((nrmse(&map(&p), &map(&x)).unwrap() - base).abs() <= 1e-12 * base.max(1.0));
    }

    #[test]
    fn bounds_are_nonnegative_and_monotone_in_gap(seed in any::<u64>(), gap in 0.0f64..1.0) {
        let mut rng = rng(seed);
        let t = 25;
        let mut series = StochasticSeries {
            p_sq_norm: (0..t).map(|_| rng.random::<f64>()).collect(),
            sigma_bar_sq: (0..t).map(|_| 0.25 * rng.random::<f64>()).collect(),
            filter_gap: vec![gap; t],
        };
        let low = bound_stochastic(&params(), &series, t).unwrap();
        prop_assert!(low.terms.iter().all(|v| *v >= 0.0));
        series.filter_gap = vec![gap + 0.1; t];
        prop_assert!(bound_stochastic(&params(), &series, t).unwrap().value > low.value);
    }
}
