//! Instantaneous losses and their gradients.
//!
//! With `y = A_x h`, the deterministic loss is `½(aᵀy − x)² + μ‖h‖²`. Under a
//! Bernoulli attachment `(p, w)` the expected loss adds the variance term
//! `½ yᵀ Σ y` with `Σ = diag(w² ∘ p ∘ (1 − p))`. The ensemble loss evaluates
//! the same expression at `p̄ = P m`, `w̄ = W n`.

use crate::attachment::{EnsembleAttachment, StochasticAttachment};
use crate::error::{check_dim, Result};
use crate::graph::{AttachmentVector, ShiftMatrix};

/// `aᵀ A_x h`, touching only the nonzeros of `a`.
pub fn predict_det(a: &AttachmentVector, sm: &ShiftMatrix, h: &[f64]) -> Result<f64> {
    let g = sm.transpose_apply_sparse(a)?;
    check_dim("prediction: filter length", sm.order(), h.len())?;
    Ok(dot(&g, h))
}

pub fn loss_det(a: &AttachmentVector, sm: &ShiftMatrix, h: &[f64], x: f64, mu: f64) -> Result<f64> {
    let r = predict_det(a, sm, h)? - x;
    Ok(0.5 * r * r + mu * dot(h, h))
}

/// `(aᵀA_xh − x)·A_xᵀa + 2μh`.
pub fn grad_det(
    a: &AttachmentVector,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let g = sm.transpose_apply_sparse(a)?;
    check_dim("gradient: filter length", sm.order(), h.len())?;
    let r = dot(&g, h) - x;
    Ok(g.iter()
        .zip(h)
        .map(|(gk, hk)| r * gk + 2.0 * mu * hk)
        .collect())
}

/// Parts of the expected loss under a stochastic attachment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticLoss {
    pub total: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub reg: f64,
}

/// `(w ∘ p)ᵀ A_x h`.
///
/// A model with every `p_n ∈ {0, 1}` is a known attachment; the stochastic
/// functions then take the deterministic code path, so S-OGF on such a model
/// reproduces D-OGF bit for bit.
pub fn predict_stoch(sa: &StochasticAttachment, sm: &ShiftMatrix, h: &[f64]) -> Result<f64> {
    check_dim(
        "stochastic prediction: attachment length",
        sm.n_rows(),
        sa.len(),
    )?;
    if let Some(a) = sa.as_deterministic() {
        return predict_det(&a, sm, h);
    }
    let y = sm.apply(h)?;
    Ok(dot(&sa.mean(), &y))
}

pub fn loss_stoch(
    sa: &StochasticAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
    mu: f64,
) -> Result<StochasticLoss> {
    check_dim("stochastic loss: attachment length", sm.n_rows(), sa.len())?;
    if let Some(a) = sa.as_deterministic() {
        let r = predict_det(&a, sm, h)? - x;
        let (bias_sq, reg) = (0.5 * r * r, mu * dot(h, h));
        return Ok(StochasticLoss {
            total: bias_sq + reg,
            bias_sq,
            variance: 0.0,
            reg,
        });
    }
    let y = sm.apply(h)?;
    let (mean, cov) = sa.moments();
    Ok(moment_loss(&mean, &cov, &y, h, x, mu))
}

/// `((w∘p)ᵀA_xh − x)·A_xᵀ(w∘p) + A_xᵀ Σ A_x h + 2μh`.
pub fn grad_stoch(
    sa: &StochasticAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    check_dim(
        "stochastic gradient: attachment length",
        sm.n_rows(),
        sa.len(),
    )?;
    if let Some(a) = sa.as_deterministic() {
        return grad_det(&a, sm, h, x, mu);
    }
    let y = sm.apply(h)?;
    let (mean, cov) = sa.moments();
    moment_grad(sm, &mean, &cov, &y, h, x, mu)
}

fn moment_loss(mean: &[f64], cov: &[f64], y: &[f64], h: &[f64], x: f64, mu: f64) -> StochasticLoss {
    let r = dot(mean, y) - x;
    let bias_sq = 0.5 * r * r;
    let variance = 0.5 * cov.iter().zip(y).map(|(c, yi)| c * yi * yi).sum::<f64>();
    let reg = mu * dot(h, h);
    StochasticLoss {
        total: bias_sq + variance + reg,
        bias_sq,
        variance,
        reg,
    }
}

fn moment_grad(
    sm: &ShiftMatrix,
    mean: &[f64],
    cov: &[f64],
    y: &[f64],
    h: &[f64],
    x: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let r = dot(mean, y) - x;
    let combined: Vec<f64> = mean
        .iter()
        .zip(cov.iter().zip(y))
        .map(|(m, (c, yi))| r * m + c * yi)
        .collect();
    let g = sm.transpose_apply(&combined)?;
    Ok(g.iter().zip(h).map(|(gk, hk)| gk + 2.0 * mu * hk).collect())
}

/// Which closed forms the combiner gradients use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientForm {
    /// Derivatives of the ensemble loss.
    #[default]
    Exact,
    /// Reference closed forms: the `m` variance part is doubled and the `n`
    /// gradient keeps only the bias term.
    Printed,
}

/// Gradients of the ensemble loss with respect to `h`, `m` and `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaGradients {
    pub h: Vec<f64>,
    pub m: Vec<f64>,
    pub n: Vec<f64>,
}

struct AdaTerms {
    y: Vec<f64>,
    p_bar: Vec<f64>,
    w_bar: Vec<f64>,
    residual: f64,
}

fn ada_terms(ens: &EnsembleAttachment, sm: &ShiftMatrix, h: &[f64], x: f64) -> Result<AdaTerms> {
    check_dim("ensemble: dictionary rows", sm.n_rows(), ens.n_rows())?;
    let y = sm.apply(h)?;
    let (p_bar, w_bar) = ens.composite();
    let residual = p_bar
        .iter()
        .zip(&w_bar)
        .zip(&y)
        .map(|((p, w), yi)| p * w * yi)
        .sum::<f64>()
        - x;
    Ok(AdaTerms {
        y,
        p_bar,
        w_bar,
        residual,
    })
}

/// Ensemble loss at the composite moments `(P m, W n)`.
pub fn loss_ada(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
    mu: f64,
) -> Result<StochasticLoss> {
    let (sa, _) = ens.compose()?;
    loss_stoch(&sa, sm, h, x, mu)
}

pub fn grad_ada_h(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
    mu: f64,
) -> Result<Vec<f64>> {
    let AdaTerms {
        y, p_bar, w_bar, ..
    } = ada_terms(ens, sm, h, x)?;
    let mean: Vec<f64> = p_bar.iter().zip(&w_bar).map(|(p, w)| p * w).collect();
    let cov: Vec<f64> = p_bar
        .iter()
        .zip(&w_bar)
        .map(|(p, w)| w * w * p * (1.0 - p))
        .collect();
    moment_grad(sm, &mean, &cov, &y, h, x, mu)
}

/// `r·Pᵀ(w̄∘y) + ½·Pᵀ(y²∘w̄²∘(1 − 2p̄))`.
pub fn grad_ada_m(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
) -> Result<Vec<f64>> {
    m_gradient(ens, &ada_terms(ens, sm, h, x)?, 0.5)
}

/// `r·Wᵀ(p̄∘y) + Wᵀ(y²∘w̄∘p̄∘(1 − p̄))`.
pub fn grad_ada_n(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
) -> Result<Vec<f64>> {
    n_gradient(ens, &ada_terms(ens, sm, h, x)?, true)
}

/// Reference form `r·Pᵀ(w̄∘y) + Pᵀ(y²∘w̄²) − 2Pᵀ(p̄∘y²∘w̄²)`; twice the
/// exact variance part.
pub fn printed_grad_m(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
) -> Result<Vec<f64>> {
    m_gradient(ens, &ada_terms(ens, sm, h, x)?, 1.0)
}

/// Reference form `r·Wᵀ(p̄∘y)`: the bias term only.
pub fn printed_grad_n(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
) -> Result<Vec<f64>> {
    n_gradient(ens, &ada_terms(ens, sm, h, x)?, false)
}

/// All three gradients at one point.
pub fn grad_ada(
    ens: &EnsembleAttachment,
    sm: &ShiftMatrix,
    h: &[f64],
    x: f64,
    mu: f64,
    form: GradientForm,
) -> Result<AdaGradients> {
    let terms = ada_terms(ens, sm, h, x)?;
    let (m, n) = match form {
        GradientForm::Exact => (
            m_gradient(ens, &terms, 0.5)?,
            n_gradient(ens, &terms, true)?,
        ),
        GradientForm::Printed => (
            m_gradient(ens, &terms, 1.0)?,
            n_gradient(ens, &terms, false)?,
        ),
    };
    Ok(AdaGradients {
        h: grad_ada_h(ens, sm, h, x, mu)?,
        m,
        n,
    })
}

fn m_gradient(ens: &EnsembleAttachment, t: &AdaTerms, variance_scale: f64) -> Result<Vec<f64>> {
    let v: Vec<f64> = t
        .y
        .iter()
        .zip(t.p_bar.iter().zip(&t.w_bar))
        .map(|(y, (p, w))| t.residual * w * y + variance_scale * y * y * w * w * (1.0 - 2.0 * p))
        .collect();
    Ok(ens.prob_transpose_apply(&v))
}

fn n_gradient(ens: &EnsembleAttachment, t: &AdaTerms, with_variance: bool) -> Result<Vec<f64>> {
    let v: Vec<f64> =
        t.y.iter()
            .zip(t.p_bar.iter().zip(&t.w_bar))
            .map(|(y, (p, w))| {
                let bias = t.residual * p * y;
                if with_variance {
                    bias + y * y * w * p * (1.0 - p)
                } else {
                    bias
                }
            })
            .collect();
    Ok(ens.weight_transpose_apply(&v))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ExpandingGraph, GraphSignal};

    fn fixture() -> ShiftMatrix {
        let g = ExpandingGraph::from_edges(3, &[(0, 1, 0.5), (1, 2, 0.25), (2, 0, 1.0)]).unwrap();
        ShiftMatrix::build(&g, &GraphSignal::new(vec![1.0, -2.0, 0.5]), 3).unwrap()
    }

    #[test]
    fn single_edge_picks_raw_signal() {
        let sm = fixture();
        let a = AttachmentVector::new(3, vec![(1, 1.0)]).unwrap();
        assert_eq!(predict_det(&a, &sm, &[1.0, 0.0, 0.0]).unwrap(), -2.0);
        assert_eq!(
            predict_det(&AttachmentVector::empty(3), &sm, &[1.0, 2.0, 3.0]).unwrap(),
            0.0
        );
    }

    #[test]
    fn zero_attachment_loss_and_gradient() {
        let sm = fixture();
        let a = AttachmentVector::empty(3);
        let h = [0.5, -1.0, 2.0];
        assert_eq!(
            loss_det(&a, &sm, &h, 2.0, 0.1).unwrap(),
            0.5 * 4.0 + 0.1 * 5.25
        );
        assert_eq!(
            grad_det(&a, &sm, &h, 2.0, 0.1).unwrap(),
            vec![0.1, -0.2, 0.4]
        );
    }

    #[test]
    fn binary_probabilities_match_deterministic() {
        let sm = fixture();
        let sa = StochasticAttachment::new(vec![1.0, 0.0, 1.0], vec![0.3, 0.7, 0.9]).unwrap();
        let a = AttachmentVector::new(3, vec![(0, 0.3), (2, 0.9)]).unwrap();
        let h = [0.2, 0.4, -0.3];
        let ls = loss_stoch(&sa, &sm, &h, 0.7, 0.05).unwrap();
        assert_eq!(ls.variance, 0.0);
        assert!((ls.total - loss_det(&a, &sm, &h, 0.7, 0.05).unwrap()).abs() < 1e-15);
        let gs = grad_stoch(&sa, &sm, &h, 0.7, 0.05).unwrap();
        let gd = grad_det(&a, &sm, &h, 0.7, 0.05).unwrap();
        for (s, d) in gs.iter().zip(&gd) {
            assert!((s - d).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_filter_cases() {
        let sm = fixture();
        let sa = StochasticAttachment::new(vec![0.2, 0.5, 0.9], vec![1.0, 2.0, 0.5]).unwrap();
        let ls = loss_stoch(&sa, &sm, &[0.0; 3], 1.5, 0.3).unwrap();
        assert_eq!(ls.total, 0.5 * 1.5 * 1.5);
        let g = grad_stoch(&sa, &sm, &[0.0; 3], 1.5, 0.3).unwrap();
        let expected = sm.transpose_apply(&sa.mean()).unwrap();
        for (gi, ei) in g.iter().zip(&expected) {
            assert!((gi + 1.5 * ei).abs() < 1e-15);
        }
        let ens =
            EnsembleAttachment::uniform_combiners(1, sa.probs().to_vec(), sa.weights().to_vec())
                .unwrap();
        assert_eq!(grad_ada_n(&ens, &sm, &[0.0; 3], 1.5).unwrap(), vec![0.0]);
        assert_eq!(grad_ada_m(&ens, &sm, &[0.0; 3], 1.5).unwrap(), vec![0.0]);
    }
}
