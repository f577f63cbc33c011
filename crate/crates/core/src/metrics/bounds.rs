//! Analytic normalized-regret bounds and their empirical audit.
//!
//! Constants `R`, `C`, `Y` are instantiated from running maxima of the
//! audited run, so the bound at step `t` only uses what was observed up to
//! `t`. Every bound ends with the deterministic tail
//! `‖h*‖²/(2ηt) + (η/2) L_d²`, `L_d = R C + 2 μ H`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::io::fmt_real;

/// Which bound a run is audited against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    /// Deterministic learner, known attachment.
    Deterministic,
    /// Single Bernoulli attachment model.
    Stochastic,
    /// Ensemble of attachment rules.
    Adaptive,
}

impl BoundKind {
    pub fn term_names(self) -> &'static [&'static str] {
        match self {
            BoundKind::Deterministic => &["init", "step"],
            BoundKind::Stochastic => &["bias", "cross", "variance", "drift", "init", "step"],
            BoundKind::Adaptive => &[
                "bias",
                "cross",
                "cross_const",
                "variance",
                "drift",
                "init",
                "step",
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretBoundParams {
    /// Bound on the residual `|aᵀA_xh − x|`.
    pub r: f64,
    /// Bound on `‖A_xᵀa‖`.
    pub c: f64,
    /// Bound on `‖A_x h‖`.
    pub y: f64,
    pub w_h: f64,
    pub m_max: f64,
    pub ball_radius: f64,
    pub eta: f64,
    pub mu: f64,
    /// `‖h*‖²` of the comparator.
    pub h_star_sq: f64,
}

impl RegretBoundParams {
    pub fn l_d(&self) -> f64 {
        self.r * self.c + 2.0 * self.mu * self.ball_radius
    }

    /// `(‖h*‖²/(2ηt), (η/2) L_d²)`; the first is infinite when `η = 0`.
    pub fn tail(&self, t: usize) -> (f64, f64) {
        let init = if self.eta > 0.0 {
            self.h_star_sq / (2.0 * self.eta * t as f64)
        } else {
            f64::INFINITY
        };
        let l = self.l_d();
        (init, 0.5 * self.eta * l * l)
    }

    fn check(&self) -> Result<()> {
        let fields = [
            self.r,
            self.c,
            self.y,
            self.w_h,
            self.m_max,
            self.ball_radius,
            self.eta,
            self.mu,
            self.h_star_sq,
        ];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "bound constants must be finite and ≥ 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// A bound value with its additive terms (ordered as [`BoundKind::term_names`]).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEvaluation {
    pub value: f64,
    pub terms: Vec<f64>,
}

impl BoundEvaluation {
    fn from_terms(terms: Vec<f64>) -> Self {
        Self {
            value: terms.iter().sum(),
            terms,
        }
    }
}

/// Per-step quantities for the single-model bound.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StochasticSeries {
    /// `‖p_t‖²`.
    pub p_sq_norm: Vec<f64>,
    /// `σ̄_t² = max_n p_n(1 − p_n)`.
    pub sigma_bar_sq: Vec<f64>,
    /// `‖h^s(t−1) − h^d(t−1)‖`.
    pub filter_gap: Vec<f64>,
}

/// Per-step quantities for the ensemble bound.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdaptiveSeries {
    /// `‖P_{t−1}‖_F²`.
    pub p_frob_sq: Vec<f64>,
    /// `‖P_{t−1}‖₂²`.
    pub p_spec_sq: Vec<f64>,
    /// Largest row norm of `P_{t−1}`.
    pub p_bar: Vec<f64>,
    pub filter_gap: Vec<f64>,
}

/// `‖h*‖²/(2ηT) + (η/2) L_d²`.
pub fn bound_deterministic(params: &RegretBoundParams, t: usize) -> f64 {
    let (init, step) = params.tail(t);
    init + step
}

fn prefix_mean(series: &[f64], t: usize, name: &str) -> Result<f64> {
    if t == 0 {
        return Err(Error::Config("bounds are defined for t ≥ 1".into()));
    }
    if series.len() < t {
        return Err(Error::Config(format!(
            "series {name} has {} entries, bound needs {t}",
            series.len()
        )));
    }
    Ok(series[..t].iter().sum::<f64>() / t as f64)
}

/// Single-model bound, summed form:
/// `(1/T)Σ[w_h²Y²(‖p‖²+M) + 2Rw_hY√(‖p‖²+M) + w_h²Y²σ̄² + L_d‖h^s−h^d‖]` plus the tail.
pub fn bound_stochastic(
    params: &RegretBoundParams,
    series: &StochasticSeries,
    t: usize,
) -> Result<BoundEvaluation> {
    params.check()?;
    let m = params.m_max;
    let shifted: Vec<f64> = series.p_sq_norm.iter().map(|p| p + m).collect();
    let roots: Vec<f64> = shifted.iter().map(|v| v.sqrt()).collect();
    let (w, y, r) = (params.w_h, params.y, params.r);
    let (init, step) = params.tail(t);
    Ok(BoundEvaluation::from_terms(vec![
        w * w * y * y * prefix_mean(&shifted, t, "p_sq_norm")?,
        2.0 * r * w * y * prefix_mean(&roots, t, "p_sq_norm")?,
        w * w * y * y * prefix_mean(&series.sigma_bar_sq, t, "sigma_bar_sq")?,
        params.l_d() * prefix_mean(&series.filter_gap, t, "filter_gap")?,
        init,
        step,
    ]))
}

/// Ensemble bound:
/// `w_h²Y²(1/T)Σ(‖P‖_F²+M) + Rw_hY(1/T)Σ‖P‖₂² + Rw_hY(1+M) + w_h²Y²(1/T)ΣP̄
/// + (1/T)ΣL_d‖h^s−h^d‖` plus the tail.
pub fn bound_adaptive(
    params: &RegretBoundParams,
    series: &AdaptiveSeries,
    t: usize,
) -> Result<BoundEvaluation> {
    params.check()?;
    let m = params.m_max;
    let (w, y, r) = (params.w_h, params.y, params.r);
    let (init, step) = params.tail(t);
    Ok(BoundEvaluation::from_terms(vec![
        w * w * y * y * (prefix_mean(&series.p_frob_sq, t, "p_frob_sq")? + m),
        r * w * y * prefix_mean(&series.p_spec_sq, t, "p_spec_sq")?,
        r * w * y * (1.0 + m),
        w * w * y * y * prefix_mean(&series.p_bar, t, "p_bar")?,
        params.l_d() * prefix_mean(&series.filter_gap, t, "filter_gap")?,
        init,
        step,
    ]))
}

/// Large-`T` form of the single-model bound under uniform attachment:
/// `w_h²M Y² + Rw_hY(M+1) + L_d·mean_gap` plus the tail.
pub fn uniform_limit_bound(params: &RegretBoundParams, mean_gap: f64, t: usize) -> f64 {
    let (w, y, r, m) = (params.w_h, params.y, params.r, params.m_max);
    w * w * m * y * y
        + r * w * y * (m + 1.0)
        + params.l_d() * mean_gap
        + bound_deterministic(params, t)
}

/// `‖P‖₂²` for a row-major `rows × cols` matrix, via the largest eigenvalue
/// of `PᵀP`.
pub fn spectral_norm_sq(p: &[f64], cols: usize) -> f64 {
    if p.is_empty() || cols == 0 {
        return 0.0;
    }
    let rows = p.len() / cols;
    let mat = DMatrix::from_row_slice(rows, cols, p);
    let gram = mat.transpose() * &mat;
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// What an audited run observed at one step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AuditObservation {
    pub online_loss: f64,
    pub comparator_loss: f64,
    /// Largest residual magnitude seen at this step.
    pub residual: f64,
    /// Largest `‖A_xᵀa‖` seen at this step.
    pub c_norm: f64,
    /// Largest `‖A_x h‖` seen at this step.
    pub y_norm: f64,
    pub p_sq_norm: f64,
    pub sigma_bar_sq: f64,
    pub p_frob_sq: f64,
    pub p_spec_sq: f64,
    pub p_bar: f64,
    pub filter_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditRow {
    pub t: usize,
    pub regret: f64,
    pub bound: f64,
    pub terms: Vec<f64>,
    pub slack: f64,
}

/// Per-step comparison of normalized regret against a bound.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundAudit {
    pub kind: BoundKind,
    pub rows: Vec<AuditRow>,
}

impl BoundAudit {
    pub fn min_slack(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.slack)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn violations(&self) -> Vec<&AuditRow> {
        self.rows.iter().filter(|r| r.slack < 0.0).collect()
    }

    /// CSV with header `t,regret,bound,<terms…>,slack`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "t,regret,bound,{},slack",
            self.kind.term_names().join(",")
        )?;
        for row in &self.rows {
            let terms: Vec<String> = row.terms.iter().map(|v| fmt_real(*v)).collect();
            writeln!(
                out,
                "{},{},{},{},{}",
                row.t,
                fmt_real(row.regret),
                fmt_real(row.bound),
                terms.join(","),
                fmt_real(row.slack)
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Audits a run step by step. `base` supplies `w_h`, `M_max`, `H`, `η`, `μ`
/// and `‖h*‖²`; `R`, `C`, `Y` are replaced by running maxima of `obs`.
pub fn audit_bound(
    kind: BoundKind,
    base: &RegretBoundParams,
    obs: &[AuditObservation],
) -> Result<BoundAudit> {
    let mut params = *base;
    params.r = 0.0;
    params.c = 0.0;
    params.y = 0.0;
    let stochastic = StochasticSeries {
        p_sq_norm: obs.iter().map(|o| o.p_sq_norm).collect(),
        sigma_bar_sq: obs.iter().map(|o| o.sigma_bar_sq).collect(),
        filter_gap: obs.iter().map(|o| o.filter_gap).collect(),
    };
    let adaptive = AdaptiveSeries {
        p_frob_sq: obs.iter().map(|o| o.p_frob_sq).collect(),
        p_spec_sq: obs.iter().map(|o| o.p_spec_sq).collect(),
        p_bar: obs.iter().map(|o| o.p_bar).collect(),
        filter_gap: stochastic.filter_gap.clone(),
    };
    let mut cumulative = 0.0;
    let mut rows = Vec::with_capacity(obs.len());
    for (i, o) in obs.iter().enumerate() {
        let t = i + 1;
        params.r = params.r.max(o.residual);
        params.c = params.c.max(o.c_norm);
        params.y = params.y.max(o.y_norm);
        cumulative += o.online_loss - o.comparator_loss;
        let eval = match kind {
            BoundKind::Deterministic => {
                let (init, step) = params.tail(t);
                BoundEvaluation::from_terms(vec![init, step])
            }
            BoundKind::Stochastic => bound_stochastic(&params, &stochastic, t)?,
            BoundKind::Adaptive => bound_adaptive(&params, &adaptive, t)?,
        };
        let regret = cumulative / t as f64;
        rows.push(AuditRow {
            t,
            regret,
            bound: eval.value,
            slack: eval.value - regret,
            terms: eval.terms,
        });
    }
    Ok(BoundAudit { kind, rows })
}
