use super::loss::{
    grad_ada, grad_det, grad_stoch, loss_ada, loss_det, loss_stoch, predict_det, predict_stoch,
    GradientForm,
};
use super::{norm, project_ball, FilterCoefficients, HyperParams, StepRecord};
use crate::attachment::{project_simplex, EnsembleAttachment, StochasticAttachment};
use crate::error::{check_dim, Error, Result};
use crate::graph::{AttachmentVector, ShiftMatrix};

/// Runs abort once a prediction leaves `[-1e12, 1e12]`.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

fn guard(t: usize, prediction: f64) -> Result<()> {
    if prediction.abs() > DIVERGENCE_LIMIT || !prediction.is_finite() {
        return Err(Error::Diverged {
            t,
            magnitude: prediction.abs(),
        });
    }
    Ok(())
}

fn descend(h: &[f64], grad: &[f64], eta: f64, radius: f64) -> Vec<f64> {
    let stepped: Vec<f64> = h.iter().zip(grad).map(|(hk, gk)| hk - eta * gk).collect();
    project_ball(&stepped, radius)
}

fn start(h0: FilterCoefficients, hp: HyperParams) -> Result<(Vec<f64>, HyperParams)> {
    hp.validate()?;
    check_dim("learner: initial filter order", hp.order, h0.order())?;
    Ok((project_ball(h0.coeffs(), hp.ball_radius), hp))
}

/// Deterministic online graph filtering: the attachment is known before
/// predicting.
#[derive(Debug, Clone)]
pub struct Dogf {
    h: Vec<f64>,
    hp: HyperParams,
    t: usize,
}

impl Dogf {
    pub fn new(h0: FilterCoefficients, hp: HyperParams) -> Result<Self> {
        let (h, hp) = start(h0, hp)?;
        Ok(Self { h, hp, t: 0 })
    }

    pub fn filter(&self) -> FilterCoefficients {
        FilterCoefficients::new(self.h.clone())
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn step(&mut self, a: &AttachmentVector, sm: &ShiftMatrix, x: f64) -> Result<StepRecord> {
        self.t += 1;
        let prediction = predict_det(a, sm, &self.h)?;
        guard(self.t, prediction)?;
        let loss = loss_det(a, sm, &self.h, x, self.hp.mu)?;
        let grad = grad_det(a, sm, &self.h, x, self.hp.mu)?;
        self.h = descend(&self.h, &grad, self.hp.eta, self.hp.ball_radius);
        Ok(StepRecord {
            t: self.t,
            prediction,
            truth: x,
            loss,
            grad_norm: norm(&grad),
            filter_after: self.filter(),
        })
    }
}

/// Stochastic online graph filtering under one Bernoulli attachment model.
#[derive(Debug, Clone)]
pub struct Sogf {
    h: Vec<f64>,
    hp: HyperParams,
    t: usize,
}

impl Sogf {
    pub fn new(h0: FilterCoefficients, hp: HyperParams) -> Result<Self> {
        let (h, hp) = start(h0, hp)?;
        Ok(Self { h, hp, t: 0 })
    }

    pub fn filter(&self) -> FilterCoefficients {
        FilterCoefficients::new(self.h.clone())
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn step(
        &mut self,
        sa: &StochasticAttachment,
        sm: &ShiftMatrix,
        x: f64,
    ) -> Result<StepRecord> {
        self.t += 1;
        let prediction = predict_stoch(sa, sm, &self.h)?;
        guard(self.t, prediction)?;
        let loss = loss_stoch(sa, sm, &self.h, x, self.hp.mu)?.total;
        let grad = grad_stoch(sa, sm, &self.h, x, self.hp.mu)?;
        self.h = descend(&self.h, &grad, self.hp.eta, self.hp.ball_radius);
        Ok(StepRecord {
            t: self.t,
            prediction,
            truth: x,
            loss,
            grad_norm: norm(&grad),
            filter_after: self.filter(),
        })
    }
}

/// Prediction–correction: an S-OGF step before the attachment is revealed,
/// then a D-OGF step from the resulting filter on the revealed attachment.
///
/// The recorded loss is the deterministic loss at the pre-step filter.
#[derive(Debug, Clone)]
pub struct PcOgf {
    h: Vec<f64>,
    hp: HyperParams,
    t: usize,
}

impl PcOgf {
    pub fn new(h0: FilterCoefficients, hp: HyperParams) -> Result<Self> {
        let (h, hp) = start(h0, hp)?;
        Ok(Self { h, hp, t: 0 })
    }

    pub fn filter(&self) -> FilterCoefficients {
        FilterCoefficients::new(self.h.clone())
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn step(
        &mut self,
        sa: &StochasticAttachment,
        a: &AttachmentVector,
        sm: &ShiftMatrix,
        x: f64,
    ) -> Result<StepRecord> {
        self.t += 1;
        let (eta, mu, radius) = (self.hp.eta, self.hp.mu, self.hp.ball_radius);
        let prediction = predict_stoch(sa, sm, &self.h)?;
        guard(self.t, prediction)?;
        let loss = loss_det(a, sm, &self.h, x, mu)?;
        let predicted = descend(&self.h, &grad_stoch(sa, sm, &self.h, x, mu)?, eta, radius);
        let correction = grad_det(a, sm, &predicted, x, mu)?;
        self.h = descend(&predicted, &correction, eta, radius);
        Ok(StepRecord {
            t: self.t,
            prediction,
            truth: x,
            loss,
            grad_norm: norm(&correction),
            filter_after: self.filter(),
        })
    }
}

/// Adaptive ensemble learner: alternating projected steps on the filter `h`
/// (ball) and the combiners `m`, `n` (simplex).
///
/// Each arrival predicts once at the current iterate, then runs
/// `steps_per_arrival` rounds of h-, m- and n-steps, each evaluated at the
/// latest values of the other blocks.
#[derive(Debug, Clone)]
pub struct AdaOgf {
    h: Vec<f64>,
    m: Vec<f64>,
    n: Vec<f64>,
    hp: HyperParams,
    combiner_eta: f64,
    steps_per_arrival: usize,
    form: GradientForm,
    t: usize,
    clip_events: usize,
}

impl AdaOgf {
    /// Combiners start at `1/M`; the combiner step size defaults to `η`.
    pub fn new(h0: FilterCoefficients, hp: HyperParams, n_rules: usize) -> Result<Self> {
        let (h, hp) = start(h0, hp)?;
        if n_rules == 0 {
            return Err(Error::Config("ensemble needs at least one rule".into()));
        }
        let bary = vec![1.0 / n_rules as f64; n_rules];
        Ok(Self {
            h,
            m: bary.clone(),
            n: bary,
            combiner_eta: hp.eta,
            hp,
            steps_per_arrival: 1,
            form: GradientForm::Exact,
            t: 0,
            clip_events: 0,
        })
    }

    pub fn with_steps_per_arrival(mut self, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::Config("steps_per_arrival must be at least 1".into()));
        }
        self.steps_per_arrival = steps;
        Ok(self)
    }

    pub fn with_gradient_form(mut self, form: GradientForm) -> Self {
        self.form = form;
        self
    }

    pub fn with_combiner_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!(
                "combiner step size {eta} must be finite and ≥ 0"
            )));
        }
        self.combiner_eta = eta;
        Ok(self)
    }

    pub fn filter(&self) -> FilterCoefficients {
        FilterCoefficients::new(self.h.clone())
    }

    pub fn prob_combiner(&self) -> &[f64] {
        &self.m
    }

    pub fn weight_combiner(&self) -> &[f64] {
        &self.n
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    /// Number of steps at which the composite probability needed clipping.
    pub fn clip_events(&self) -> usize {
        self.clip_events
    }

    /// Current combiners over the dictionaries `P`, `W` (row-major `N × M`).
    pub fn ensemble(&self, probs: Vec<f64>, weights: Vec<f64>) -> Result<EnsembleAttachment> {
        EnsembleAttachment::new(self.m.len(), probs, weights, self.m.clone(), self.n.clone())
    }

    pub fn step(
        &mut self,
        probs: Vec<f64>,
        weights: Vec<f64>,
        sm: &ShiftMatrix,
        x: f64,
    ) -> Result<StepRecord> {
        self.t += 1;
        let mut ens = self.ensemble(probs, weights)?;
        let (sa, clipped) = ens.compose()?;
        self.clip_events += usize::from(clipped);
        let prediction = predict_stoch(&sa, sm, &self.h)?;
        guard(self.t, prediction)?;
        let (mu, radius) = (self.hp.mu, self.hp.ball_radius);
        let loss = loss_ada(&ens, sm, &self.h, x, mu)?.total;
        let mut first_grad = None;
        for _ in 0..self.steps_per_arrival {
            let g = grad_ada(&ens, sm, &self.h, x, mu, self.form)?;
            first_grad.get_or_insert_with(|| norm(&g.h));
            self.h = descend(&self.h, &g.h, self.hp.eta, radius);

            let g = grad_ada(&ens, sm, &self.h, x, mu, self.form)?;
            self.m = simplex_step(&self.m, &g.m, self.combiner_eta);
            ens.set_combiners(self.m.clone(), self.n.clone())?;

            let g = grad_ada(&ens, sm, &self.h, x, mu, self.form)?;
            self.n = simplex_step(&self.n, &g.n, self.combiner_eta);
            ens.set_combiners(self.m.clone(), self.n.clone())?;
        }
        Ok(StepRecord {
            t: self.t,
            prediction,
            truth: x,
            loss,
            grad_norm: first_grad.unwrap_or(0.0),
            filter_after: self.filter(),
        })
    }
}

fn simplex_step(c: &[f64], grad: &[f64], eta: f64) -> Vec<f64> {
    if eta == 0.0 {
        return c.to_vec();
    }
    let stepped: Vec<f64> = c.iter().zip(grad).map(|(ci, gi)| ci - eta * gi).collect();
    project_simplex(&stepped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ExpandingGraph, GraphSignal};

    fn fixture() -> (ShiftMatrix, AttachmentVector) {
        let g =
            ExpandingGraph::from_edges(4, &[(0, 1, 0.5), (1, 2, 0.25), (2, 0, 1.0), (3, 1, 0.75)])
                .unwrap();
        let sm = ShiftMatrix::build(&g, &GraphSignal::new(vec![1.0, -2.0, 0.5, 0.25]), 2).unwrap();
        let a = AttachmentVector::new(4, vec![(0, 0.5), (2, 1.0)]).unwrap();
        (sm, a)
    }

    #[test]
    fn dogf_single_step_arithmetic() {
        let (sm, a) = fixture();
        let hp = HyperParams::new(0.1, 0.0, 2, 1e9).unwrap();
        let mut learner = Dogf::new(vec![0.3, -0.2].into(), hp).unwrap();
        let rec = learner.step(&a, &sm, 1.0).unwrap();
        let g = [
            0.5 * 1.0 + 1.0 * 0.5,
            0.5 * sm.entry(0, 1) + 1.0 * sm.entry(2, 1),
        ];
        let pred = 0.3 * g[0] - 0.2 * g[1];
        let r = pred - 1.0;
        assert!((rec.prediction - pred).abs() < 1e-15);
        let h = learner.filter();
        assert!((h.coeffs()[0] - (0.3 - 0.1 * r * g[0])).abs() < 1e-15);
        assert!((h.coeffs()[1] - (-0.2 - 0.1 * r * g[1])).abs() < 1e-15);
    }

    #[test]
    fn zero_step_size_freezes_every_learner() {
        let (sm, a) = fixture();
        let hp = HyperParams::new(0.0, 0.1, 2, 10.0).unwrap();
        let h0: FilterCoefficients = vec![0.4, 0.1].into();
        let sa = StochasticAttachment::with_common_weight(vec![0.25; 4], 0.5).unwrap();
        let mut d = Dogf::new(h0.clone(), hp).unwrap();
        let mut s = Sogf::new(h0.clone(), hp).unwrap();
        let mut pc = PcOgf::new(h0.clone(), hp).unwrap();
        let mut ada = AdaOgf::new(h0.clone(), hp, 2).unwrap();
        for _ in 0..3 {
            d.step(&a, &sm, 0.7).unwrap();
            s.step(&sa, &sm, 0.7).unwrap();
            pc.step(&sa, &a, &sm, 0.7).unwrap();
            ada.step(vec![0.25; 8], vec![0.5; 8], &sm, 0.7).unwrap();
        }
        for h in [d.filter(), s.filter(), pc.filter(), ada.filter()] {
            assert_eq!(h, h0);
        }
        assert_eq!(ada.prob_combiner(), &[0.5, 0.5]);
    }

    #[test]
    fn divergence_is_reported() {
        let (sm, a) = fixture();
        let hp = HyperParams::new(0.0, 0.0, 2, 1e20).unwrap();
        let mut d = Dogf::new(vec![1e13, 0.0].into(), hp).unwrap();
        assert!(matches!(
            d.step(&a, &sm, 0.0),
            Err(Error::Diverged { t: 1, .. })
        ));
    }

    #[test]
    fn ada_combiners_stay_on_simplex() {
        let (sm, _) = fixture();
        let hp = HyperParams::new(0.5, 0.01, 2, 10.0).unwrap();
        let mut ada = AdaOgf::new(vec![0.5, 0.5].into(), hp, 2)
            .unwrap()
            .with_steps_per_arrival(3)
            .unwrap();
        let probs = vec![0.9, 0.1, 0.2, 0.3, 0.7, 0.0, 0.4, 0.4];
        for x in [1.0, -2.0, 3.0, 0.5] {
            ada.step(probs.clone(), vec![0.5; 8], &sm, x).unwrap();
            for c in [ada.prob_combiner(), ada.weight_combiner()] {
                assert!(crate::attachment::is_on_simplex(c, 1e-9));
            }
            assert!(ada.filter().norm() <= 10.0 + 1e-12);
        }
    }
}
