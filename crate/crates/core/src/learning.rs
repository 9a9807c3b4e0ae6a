//! Online learning of expert weights.
//!
//! The aggregator's score `WS_j(w) = s(QA pool of (p_i, w_i); j)` is concave
//! in the weight vector, so online gradient descent on the loss
//! `L(w) = -WS_j(w)` over the weight simplex has `O(√T)` regret against the
//! best fixed weights in hindsight:
//!
//! ```text
//! regret ≤ 3 √m · M · √T,   M ≥ sup ‖g(p)‖₂,   η_t = 1 / (M √(m t))
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::pooling::{linear_pool, logarithmic_pool, minimize_on_shell, qa_pool, WeightedForecast};
use crate::sampling;
use crate::scoring::{check_outcome, score, score_vector, Family, Forecast, RuleSpec};
use crate::simplex::{center, dot, project_onto_simplex};

/// A point of the weight simplex `Δ^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(QaError::Config("weight vector is empty".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(QaError::Config("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(QaError::Config(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    pub fn vertex(m: usize, i: usize) -> Self {
        let mut v = vec![0.0; m];
        v[i] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = QaError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

/// Pooling operator used inside the weight-score.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooler {
    QuasiArithmetic,
    Linear,
    Logarithmic,
}

fn weighted(forecasts: &[Forecast], w: &[f64]) -> Result<Vec<WeightedForecast>> {
    if forecasts.len() != w.len() {
        return Err(QaError::Config(format!(
            "{} forecasts but {} weights",
            forecasts.len(),
            w.len()
        )));
    }
    Ok(forecasts
        .iter()
        .zip(w)
        .map(|(p, &wi)| WeightedForecast::new(p.clone(), wi))
        .collect())
}

/// QA pool of `forecasts` under weights `w`.
pub fn pooled_forecast(rule: &RuleSpec, forecasts: &[Forecast], w: &WeightVector) -> Result<Forecast> {
    Ok(qa_pool(rule, &weighted(forecasts, w.as_slice())?)?.pooled)
}

/// `WS_j(w)`: the score of the QA pool when outcome `j` (0-based) occurs.
pub fn weight_score(rule: &RuleSpec, forecasts: &[Forecast], w: &WeightVector, j: usize) -> Result<f64> {
    weight_score_with(rule, forecasts, w, j, Pooler::QuasiArithmetic)
}

/// Weight-score with an alternative pooling operator plugged in.
pub fn weight_score_with(
    rule: &RuleSpec,
    forecasts: &[Forecast],
    w: &WeightVector,
    j: usize,
    pooler: Pooler,
) -> Result<f64> {
    let inputs = weighted(forecasts, w.as_slice())?;
    let pooled = match pooler {
        Pooler::QuasiArithmetic => qa_pool(rule, &inputs)?.pooled,
        Pooler::Linear => linear_pool(&inputs)?,
        Pooler::Logarithmic => logarithmic_pool(&inputs)?,
    };
    score(rule, &pooled, j)
}

/// Gradient of `L(w) = -WS_j(w)`: entry `i` is `<g(p_i), p*(w) - δ_j>`,
/// centered over the `m` entries.
pub fn loss_gradient(rule: &RuleSpec, forecasts: &[Forecast], w: &WeightVector, j: usize) -> Result<Vec<f64>> {
    let pooled = pooled_forecast(rule, forecasts, w)?;
    let j = check_outcome(j, pooled.len())?;
    let mut direction = pooled.into_inner();
    direction[j] -= 1.0;
    let raw = forecasts
        .iter()
        .map(|p| {
            rule.check_domain(p.probs())?;
            Ok(dot(&center(&rule.raw_gradient(p.probs())), &direction))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(center(&raw))
}

/// Euclidean projection onto `Δ^m`.
pub fn project_to_simplex(y: &[f64]) -> WeightVector {
    WeightVector(project_onto_simplex(y))
}

/// One round of the online problem: the experts' forecasts and the realized outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub forecasts: Vec<Forecast>,
    /// 0-based outcome index.
    pub outcome: usize,
}

impl Step {
    pub fn new(forecasts: Vec<Forecast>, outcome: usize) -> Result<Self> {
        let n = forecasts
            .first()
            .ok_or_else(|| QaError::Config("a step needs at least one forecast".into()))?
            .len();
        if forecasts.iter().any(|p| p.len() != n) {
            return Err(QaError::Config("forecasts in a step disagree on outcome count".into()));
        }
        check_outcome(outcome, n)?;
        Ok(Self { forecasts, outcome })
    }
}

/// Sup of the canonical `‖g‖₂` over the closed simplex, for rules where it is finite.
pub fn default_exposure_bound(rule: &RuleSpec, n: usize) -> Option<f64> {
    let n = n as f64;
    match rule.family() {
        Family::Quadratic => Some(2.0 * ((n - 1.0) / n).sqrt()),
        Family::Spherical(alpha) => {
            let beta = alpha / (alpha - 1.0);
            Some(if beta <= 2.0 { 1.0 } else { n.powf(0.5 - 1.0 / beta) })
        }
        Family::Tsallis(gamma) => Some(if gamma >= 1.5 {
            gamma
        } else {
            gamma * n.powf((3.0 - 2.0 * gamma) / 2.0)
        }),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub rule: RuleSpec,
    /// Number of experts `m`.
    pub experts: usize,
    /// Upper bound `M` on `‖g‖₂`; derived for bounded rules when absent.
    pub exposure_bound: Option<f64>,
    pub seed: u64,
    pub horizon: Option<usize>,
}

impl LearningConfig {
    pub fn new(rule: RuleSpec, experts: usize) -> Self {
        Self {
            rule,
            experts,
            exposure_bound: None,
            seed: 0,
            horizon: None,
        }
    }

    pub fn resolved_bound(&self, n: usize) -> Result<f64> {
        let bound = match self.exposure_bound {
            Some(m) => m,
            None => default_exposure_bound(&self.rule, n).ok_or_else(|| {
                QaError::Config(format!(
                    "rule {} has unbounded exposure; supply an explicit bound M",
                    self.rule
                ))
            })?,
        };
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(QaError::Config(format!("exposure bound must be positive, got {bound}")));
        }
        Ok(bound)
    }
}

/// Online gradient descent over `Δ^m` with `η_t = 1/(M √(m t))`.
#[derive(Clone, Debug)]
pub struct OnlineLearner {
    rule: RuleSpec,
    bound: f64,
    weights: WeightVector,
    round: usize,
    violations: usize,
}

impl OnlineLearner {
    /// Starts from uniform weights.
    pub fn new(rule: RuleSpec, experts: usize, bound: f64) -> Result<Self> {
        if experts == 0 {
            return Err(QaError::Config("need at least one expert".into()));
        }
        if !(bound > 0.0) {
            return Err(QaError::Config(format!("exposure bound must be positive, got {bound}")));
        }
        Ok(Self {
            rule,
            bound,
            weights: WeightVector::uniform(experts),
            round: 0,
            violations: 0,
        })
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    /// Forecasts seen so far whose exposure norm exceeded the bound.
    pub fn violations(&self) -> usize {
        self.violations
    }

    /// Plays the current weights on `step`, returns the loss, and updates.
    pub fn observe(&mut self, step: &Step) -> Result<f64> {
        let m = self.weights.len();
        if step.forecasts.len() != m {
            return Err(QaError::Config(format!(
                "expected {m} forecasts, got {}",
                step.forecasts.len()
            )));
        }
        for p in &step.forecasts {
            let g = crate::scoring::exposure(&self.rule, p)?;
            if g.norm() > self.bound * (1.0 + 1e-12) {
                self.violations += 1;
            }
        }
        let loss = -weight_score(&self.rule, &step.forecasts, &self.weights, step.outcome)?;
        self.round += 1;
        if m > 1 {
            let grad = loss_gradient(&self.rule, &step.forecasts, &self.weights, step.outcome)?;
            let eta = 1.0 / (self.bound * ((m * self.round) as f64).sqrt());
            let moved: Vec<f64> = self
                .weights
                .as_slice()
                .iter()
                .zip(&grad)
                .map(|(w, g)| w - eta * g)
                .collect();
            self.weights = project_to_simplex(&moved);
        }
        Ok(loss)
    }
}

/// Outcome of [`ogd_run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub rule: RuleSpec,
    pub exposure_bound: f64,
    pub per_step_loss: Vec<f64>,
    /// Per-step loss of the best fixed weights in hindsight.
    pub comparator_loss: Vec<f64>,
    pub best_fixed_loss: f64,
    pub cumulative_regret: f64,
    /// `3 √m · M · √T`
    pub bound: f64,
    pub final_weights: WeightVector,
    pub best_weights: WeightVector,
    /// Number of forecasts with `‖g‖₂ > M`; the regret bound is void when nonzero.
    pub m_violations: usize,
}

/// One row of the regret curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub cumulative_regret: f64,
    pub bound: f64,
}

impl RegretReport {
    pub fn bound_is_valid(&self) -> bool {
        self.m_violations == 0
    }

    /// Running regret against the final comparator, with the bound at each `t`.
    pub fn curve(&self) -> Vec<CurvePoint> {
        let m = self.best_weights.len() as f64;
        let mut regret = 0.0;
        self.per_step_loss
            .iter()
            .zip(&self.comparator_loss)
            .enumerate()
            .map(|(i, (l, c))| {
                regret += l - c;
                let t = i + 1;
                CurvePoint {
                    t,
                    cumulative_regret: regret,
                    bound: regret_bound(m as usize, self.exposure_bound, t),
                }
            })
            .collect()
    }
}

pub fn regret_bound(experts: usize, exposure_bound: f64, horizon: usize) -> f64 {
    3.0 * (experts as f64).sqrt() * exposure_bound * (horizon as f64).sqrt()
}

fn stream_shape(stream: &[Step]) -> Result<(usize, usize)> {
    let first = stream
        .first()
        .ok_or_else(|| QaError::Config("stream is empty".into()))?;
    let m = first.forecasts.len();
    let n = first.forecasts[0].len();
    for step in stream {
        if step.forecasts.len() != m || step.forecasts.iter().any(|p| p.len() != n) {
            return Err(QaError::Config("stream steps disagree on expert or outcome count".into()));
        }
        check_outcome(step.outcome, n)?;
    }
    Ok((m, n))
}

/// Runs online gradient descent over `stream` and compares against the best
/// fixed weights in hindsight.
pub fn ogd_run(config: &LearningConfig, stream: &[Step]) -> Result<RegretReport> {
    let (m, n) = stream_shape(stream)?;
    if m != config.experts {
        return Err(QaError::Config(format!(
            "config expects {} experts, stream has {m}",
            config.experts
        )));
    }
    let stream = match config.horizon {
        Some(h) if h < stream.len() => &stream[..h],
        _ => stream,
    };
    let bound = config.resolved_bound(n)?;
    let mut learner = OnlineLearner::new(config.rule, m, bound)?;
    let per_step_loss = stream
        .iter()
        .map(|step| learner.observe(step))
        .collect::<Result<Vec<f64>>>()?;
    let (best_weights, _) = offline_best_weights(&config.rule, stream)?;
    let comparator_loss = stream
        .iter()
        .map(|step| Ok(-weight_score(&config.rule, &step.forecasts, &best_weights, step.outcome)?))
        .collect::<Result<Vec<f64>>>()?;
    let best_fixed_loss: f64 = comparator_loss.iter().sum();
    let total: f64 = per_step_loss.iter().sum();
    Ok(RegretReport {
        rule: config.rule,
        exposure_bound: bound,
        cumulative_regret: total - best_fixed_loss,
        bound: regret_bound(m, bound, stream.len()),
        per_step_loss,
        comparator_loss,
        best_fixed_loss,
        final_weights: learner.weights().clone(),
        best_weights,
        m_violations: learner.violations(),
    })
}

/// Stationarity tolerance of the offline comparator.
pub const OFFLINE_TOLERANCE: f64 = 1e-8;
const OFFLINE_MAX_ITERATIONS: usize = 1_000_000;

/// Weights maximizing the total weight-score over a recorded stream, and that total.
pub fn offline_best_weights(rule: &RuleSpec, stream: &[Step]) -> Result<(WeightVector, f64)> {
    let (m, _) = stream_shape(stream)?;
    if m == 1 {
        let w = WeightVector::uniform(1);
        let total = total_score(rule, stream, &w)?;
        return Ok((w, total));
    }
    let horizon = stream.len() as f64;
    // Errors inside the closures are surfaced after the solve.
    let failure = std::cell::RefCell::new(None::<QaError>);
    let record = |e: QaError| {
        failure.borrow_mut().get_or_insert(e);
    };
    let objective = |w: &[f64]| -> f64 {
        let w = WeightVector(w.to_vec());
        match total_score(rule, stream, &w) {
            Ok(s) => -s / horizon,
            Err(e) => {
                record(e);
                f64::NAN
            }
        }
    };
    let gradient = |w: &[f64]| -> Vec<f64> {
        let wv = WeightVector(w.to_vec());
        let mut acc = vec![0.0; m];
        for step in stream {
            match loss_gradient(rule, &step.forecasts, &wv, step.outcome) {
                Ok(g) => acc.iter_mut().zip(g).for_each(|(a, gi)| *a += gi / horizon),
                Err(e) => {
                    record(e);
                    return vec![f64::NAN; m];
                }
            }
        }
        acc
    };
    let outcome = minimize_on_shell(
        objective,
        gradient,
        vec![1.0 / m as f64; m],
        0.0,
        OFFLINE_TOLERANCE,
        OFFLINE_MAX_ITERATIONS,
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    if outcome.stationarity > 100.0 * OFFLINE_TOLERANCE {
        return Err(QaError::Convergence(format!(
            "offline comparator stopped at stationarity {:e}",
            outcome.stationarity
        )));
    }
    let w = WeightVector::new(project_onto_simplex(&outcome.x))?;
    let total = total_score(rule, stream, &w)?;
    Ok((w, total))
}

/// `Σ_t WS_{j_t}(w)` over a stream.
pub fn total_score(rule: &RuleSpec, stream: &[Step], w: &WeightVector) -> Result<f64> {
    stream
        .iter()
        .map(|step| weight_score(rule, &step.forecasts, w, step.outcome))
        .sum()
}

/// Stream where expert 0 reports the true distribution and the others report
/// independent noise; outcomes are drawn from the truth.
pub fn iid_truthful_stream(n: usize, experts: usize, horizon: usize, seed: u64) -> Vec<Step> {
    let mut rng = sampling::sample_rng(seed, 0);
    (0..horizon)
        .map(|_| {
            let truth = sampling::dirichlet(&mut rng, n);
            let mut forecasts = vec![truth.clone()];
            forecasts.extend((1..experts).map(|_| sampling::dirichlet(&mut rng, n)));
            let outcome = sampling::draw_from(&mut rng, &truth);
            Step { forecasts, outcome }
        })
        .collect()
}

/// Runs the learner against an adaptive adversary: forecasts are random and
/// each outcome is chosen to minimize the learner's score at its current weights.
///
/// Returns the realized stream, which can be replayed through [`ogd_run`].
pub fn adversarial_stream(
    rule: &RuleSpec,
    n: usize,
    experts: usize,
    horizon: usize,
    bound: f64,
    seed: u64,
) -> Result<Vec<Step>> {
    let mut rng = sampling::sample_rng(seed, 1);
    let mut learner = OnlineLearner::new(*rule, experts, bound)?;
    let mut stream = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let forecasts: Vec<Forecast> = (0..experts)
            .map(|_| {
                // keep away from the boundary so open-domain rules stay bounded
                let raw = sampling::dirichlet(&mut rng, n);
                Forecast::from_mass(raw.probs().iter().map(|x| 0.9 * x + 0.1 / n as f64).collect())
            })
            .collect();
        let pooled = pooled_forecast(rule, &forecasts, learner.weights())?;
        let scores = score_vector(rule, &pooled)?;
        let outcome = scores
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        let step = Step { forecasts, outcome };
        learner.observe(&step)?;
        stream.push(step);
    }
    Ok(stream)
}
