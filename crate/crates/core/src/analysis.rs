//! Verification of the optimality and axiomatic properties of QA pooling.
//!
//! An aggregator who pays expert `i` the amount `ŵ_i s(p_i; j)` and reports
//! `p` keeps `u(p; j) = s(p; j) - Σ ŵ_i s(p_i; j)`. At the QA pool this profit
//! is the same for every outcome and equals `Σ ŵ_i D_G(p* ‖ p_i)`, and no other
//! report achieves a larger worst-case profit.

use serde::Serialize;

use crate::error::{QaError, Result};
use crate::learning::{weight_score, WeightVector};
use crate::pooling::{combine, invert_exposure, prepare, qa_pool, WeightedForecast};
use crate::sampling::{self, sample_rng};
use crate::scoring::{
    bregman_unchecked, check_outcome, exposure, has_convex_exposure, score_vector, DomainKind,
    ExposureVector, Forecast, RuleSpec,
};
use crate::simplex::{distance, dot};

/// `u(report; j)` for every outcome `j`.
pub fn utility_vector(rule: &RuleSpec, report: &Forecast, inputs: &[WeightedForecast]) -> Result<Vec<f64>> {
    let prepared = prepare(rule, inputs)?;
    if report.len() != prepared.n {
        return Err(QaError::Domain("report and inputs disagree on outcome count".into()));
    }
    let mut utility = score_vector(rule, report)?;
    for (w, p) in &prepared.members {
        for (u, s) in utility.iter_mut().zip(score_vector(rule, p)?) {
            *u -= w * s;
        }
    }
    Ok(utility)
}

/// Aggregator profit `u(report; j)` with normalized weights.
pub fn aggregator_utility(
    rule: &RuleSpec,
    report: &Forecast,
    inputs: &[WeightedForecast],
    j: usize,
) -> Result<f64> {
    let j = check_outcome(j, report.len())?;
    Ok(utility_vector(rule, report, inputs)?[j])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SurplusReport {
    pub pooled: Forecast,
    pub per_outcome_utility: Vec<f64>,
    /// Guaranteed profit `min_j u(p*; j)`.
    pub surplus: f64,
    /// `max_j u - min_j u`
    pub equalization_gap: f64,
    /// `Σ ŵ_i D_G(p* ‖ p_i)`
    pub bregman_sum: f64,
}

/// Profit profile at the QA pool.
pub fn surplus_report(rule: &RuleSpec, inputs: &[WeightedForecast]) -> Result<SurplusReport> {
    let pooled = qa_pool(rule, inputs)?.pooled;
    surplus_report_at(rule, &pooled, inputs)
}

/// Profit profile at an arbitrary report.
pub fn surplus_report_at(rule: &RuleSpec, report: &Forecast, inputs: &[WeightedForecast]) -> Result<SurplusReport> {
    let per_outcome_utility = utility_vector(rule, report, inputs)?;
    let prepared = prepare(rule, inputs)?;
    let bregman_sum = prepared
        .members
        .iter()
        .map(|(w, p)| w * bregman_unchecked(rule, report.probs(), p.probs()))
        .sum();
    let min = per_outcome_utility.iter().copied().fold(f64::INFINITY, f64::min);
    let max = per_outcome_utility.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SurplusReport {
        pooled: report.clone(),
        per_outcome_utility,
        surplus: min,
        equalization_gap: max - min,
        bregman_sum,
    })
}

/// Separation below which an alternative report is considered a tie.
pub const MAXMIN_SEPARATION: f64 = 1e-12;
/// Distance of the near alternatives from the pool.
pub const MAXMIN_PERTURBATION: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxMinCheck {
    pub passed: bool,
    pub trials: usize,
    /// `min_j u(p*; j)`
    pub optimum: f64,
    /// Smallest observed `min_j u(p*) - min_j u(q)` over the alternatives.
    pub worst_margin: f64,
}

/// Samples alternative reports and checks none matches the pool's guaranteed profit.
///
/// Half of the alternatives sit at distance `1e-3` from `p*` (mixtures toward
/// a random forecast); the rest are random forecasts at least that far away.
pub fn maxmin_verify(rule: &RuleSpec, inputs: &[WeightedForecast], trials: usize, seed: u64) -> Result<MaxMinCheck> {
    let pooled = qa_pool(rule, inputs)?.pooled;
    let min_u = |q: &Forecast| -> Result<f64> {
        Ok(utility_vector(rule, q, inputs)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    };
    let optimum = min_u(&pooled)?;
    let n = pooled.len();
    let mut worst = f64::INFINITY;
    for trial in 0..trials {
        let mut rng = sample_rng(seed, trial as u64);
        let q = loop {
            let r = sampling::dirichlet(&mut rng, n);
            let gap = distance(r.probs(), pooled.probs());
            if gap < MAXMIN_PERTURBATION {
                continue;
            }
            if trial % 2 == 1 {
                break r;
            }
            let lambda = MAXMIN_PERTURBATION / gap;
            let mix = pooled
                .probs()
                .iter()
                .zip(r.probs())
                .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
                .collect();
            break Forecast::from_mass(mix);
        };
        worst = worst.min(optimum - min_u(&q)?);
    }
    Ok(MaxMinCheck {
        passed: trials == 0 || worst > MAXMIN_SEPARATION,
        trials,
        optimum,
        worst_margin: worst,
    })
}

/// `Σ_i <g(x_i), x_i - x_{i-1}>` over the closed cycle `x_0 = x_k`.
pub fn cycle_sum(rule: &RuleSpec, points: &[Forecast]) -> Result<f64> {
    let k = points.len();
    let mut total = 0.0;
    for i in 0..k {
        let prev = &points[(i + k - 1) % k];
        let g = exposure(rule, &points[i])?;
        let step: Vec<f64> = points[i].probs().iter().zip(prev.probs()).map(|(a, b)| a - b).collect();
        total += dot(g.coords(), &step);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomCheck {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation (for monotonicity: smallest observed increase).
    pub worst_gap: f64,
    pub tolerance: f64,
    /// Sampled evidence rather than a decisive check.
    pub evidence_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AxiomReport {
    pub rule: RuleSpec,
    pub n: usize,
    pub samples: usize,
    pub seed: u64,
    pub checks: Vec<AxiomCheck>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AxiomCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Tracks the worst deviation of one axiom across samples.
struct Tally {
    name: &'static str,
    tolerance: f64,
    worst: f64,
    evidence_only: bool,
    /// true: deviations must stay ≤ tolerance; false: margins must exceed it.
    upper: bool,
    failed: bool,
}

impl Tally {
    fn deviation(name: &'static str, tolerance: f64) -> Self {
        Self { name, tolerance, worst: 0.0, evidence_only: false, upper: true, failed: false }
    }

    fn margin(name: &'static str, floor: f64) -> Self {
        Self { name, tolerance: floor, worst: f64::INFINITY, evidence_only: false, upper: false, failed: false }
    }

    fn evidence(mut self) -> Self {
        self.evidence_only = true;
        self
    }

    fn record(&mut self, value: f64) {
        if value.is_nan() {
            self.failed = true;
        } else if self.upper {
            self.worst = self.worst.max(value);
        } else {
            self.worst = self.worst.min(value);
        }
    }

    fn fail(&mut self) {
        self.failed = true;
    }

    fn finish(self) -> AxiomCheck {
        let within = if self.upper {
            self.worst <= self.tolerance
        } else {
            self.worst > self.tolerance
        };
        AxiomCheck {
            name: self.name,
            passed: !self.failed && within,
            worst_gap: self.worst,
            tolerance: self.tolerance,
            evidence_only: self.evidence_only,
        }
    }
}

fn sup_distance(a: &Forecast, b: &Forecast) -> f64 {
    a.probs()
        .iter()
        .zip(b.probs())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

const MONOTONICITY_GRID: usize = 64;

/// Checks the pooling axioms on `samples` random draws.
///
/// Weight additivity, commutativity, associativity, idempotence, continuity
/// and subtraction are checked on random weighted forecasts. Monotonicity is
/// checked on a weight grid for `n = 2` and as strict cyclical monotonicity of
/// the exposure map on random cycles of up to five points for every `n`.
pub fn axiom_suite(rule: &RuleSpec, n: usize, samples: usize, seed: u64) -> Result<AxiomReport> {
    if n < 2 {
        return Err(QaError::Config("need at least 2 outcomes".into()));
    }
    if !has_convex_exposure(rule, n) {
        return Err(QaError::Config(format!(
            "rule {rule} lacks convex exposure at n = {n}; the QA operator is not total"
        )));
    }
    let mut additivity = Tally::deviation("weight_additivity", 0.0);
    let mut commutativity = Tally::deviation("commutativity", 1e-12);
    let mut associativity = Tally::deviation("associativity", 1e-9);
    let mut idempotence = Tally::deviation("idempotence", 1e-12);
    let mut continuity = Tally::deviation("continuity", 1e-3).evidence();
    let mut subtraction = Tally::deviation("subtraction", 1e-7);
    let mut monotonicity = Tally::margin("monotonicity", 0.0);
    let mut cyclical = Tally::margin("cyclical_monotonicity", 1e-12);

    for i in 0..samples {
        let mut rng = sample_rng(seed, i as u64);
        let mut draw = || {
            let p = sampling::dirichlet(&mut rng, n);
            let w = sampling::weight(&mut rng);
            (p, w)
        };
        let (p1, w1) = draw();
        let (p2, w2) = draw();
        let (p3, w3) = draw();
        let a = WeightedForecast::new(p1.clone(), w1);
        let b = WeightedForecast::new(p2.clone(), w2);
        let c = WeightedForecast::new(p3.clone(), w3);

        let mut run = || -> Result<()> {
            let ab = combine(rule, &a, &b)?;
            let ba = combine(rule, &b, &a)?;
            additivity.record((ab.weight - (w1 + w2)).abs());
            commutativity.record(sup_distance(&ab.forecast, &ba.forecast).max((ab.weight - ba.weight).abs()));

            let left = combine(rule, &ab, &c)?;
            let right = combine(rule, &a, &combine(rule, &b, &c)?)?;
            associativity.record(sup_distance(&left.forecast, &right.forecast));

            let same = combine(rule, &a, &WeightedForecast::new(p1.clone(), w2))?;
            idempotence.record(sup_distance(&same.forecast, &p1));

            let nudged = combine(rule, &WeightedForecast::new(p1.clone(), w1 + 1e-6), &b)?;
            continuity.record(distance(nudged.forecast.probs(), ab.forecast.probs()));

            // recover Π2 from Π1 ⊕ Π2 and Π1
            let g_ab = exposure(rule, &ab.forecast)?;
            let g_a = exposure(rule, &p1)?;
            let total = ab.weight;
            let diff: Vec<f64> = g_ab
                .coords()
                .iter()
                .zip(g_a.coords())
                .map(|(x, y)| (total * x - w1 * y) / (total - w1))
                .collect();
            let recovered = invert_exposure(rule, &ExposureVector::canonicalize(&diff))?;
            subtraction.record(sup_distance(&recovered, &p2));
            Ok(())
        };
        if run().is_err() {
            for t in [&mut additivity, &mut commutativity, &mut associativity, &mut idempotence, &mut continuity, &mut subtraction] {
                t.fail();
            }
        }

        if n == 2 {
            let (hi, lo) = if p1.probs()[0] >= p2.probs()[0] { (&p1, &p2) } else { (&p2, &p1) };
            if hi.probs()[0] - lo.probs()[0] > 1e-3 {
                let total = w1 + w2;
                let mut prev = f64::NEG_INFINITY;
                for k in 1..=MONOTONICITY_GRID {
                    let x = total * k as f64 / (MONOTONICITY_GRID + 1) as f64;
                    let pooled = combine(
                        rule,
                        &WeightedForecast::new(hi.clone(), x),
                        &WeightedForecast::new(lo.clone(), total - x),
                    );
                    match pooled {
                        Ok(r) => {
                            let v = r.forecast.probs()[0];
                            if k > 1 {
                                monotonicity.record(v - prev);
                            }
                            prev = v;
                        }
                        Err(_) => monotonicity.fail(),
                    }
                }
            }
        }

        let k = 2 + i % 4;
        let mut rng = sample_rng(seed ^ 0x5eed_c1c1e, i as u64);
        let cycle: Vec<Forecast> = (0..k).map(|_| sampling::dirichlet(&mut rng, n)).collect();
        match cycle_sum(rule, &cycle) {
            Ok(s) => cyclical.record(s),
            Err(_) => cyclical.fail(),
        }
    }

    let mut checks = vec![
        additivity.finish(),
        commutativity.finish(),
        associativity.finish(),
        idempotence.finish(),
        continuity.finish(),
        subtraction.finish(),
    ];
    if n == 2 {
        checks.push(monotonicity.finish());
    }
    checks.push(cyclical.finish());
    Ok(AxiomReport { rule: *rule, n, samples, seed, checks })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExposureProbeReport {
    pub rule: RuleSpec,
    pub n: usize,
    pub samples: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub convex_exposure: bool,
    /// Whether averaging the exposures of `δ_1` and `δ_2` failed to invert;
    /// `None` when the pair is outside the domain or `n = 2`.
    pub canonical_failure: Option<bool>,
    pub passed: bool,
}

/// Averages exposures of random pairs and attempts to invert the average.
pub fn exposure_probe(rule: &RuleSpec, n: usize, samples: usize, seed: u64) -> ExposureProbeReport {
    let mut failures = 0;
    for i in 0..samples {
        let mut rng = sample_rng(seed, i as u64);
        let p = sampling::dirichlet(&mut rng, n);
        let q = sampling::dirichlet(&mut rng, n);
        let w: f64 = sampling::weight(&mut rng);
        if !averaged_exposure_inverts(rule, &p, &q, w) {
            failures += 1;
        }
    }
    let canonical_failure = (n > 2 && rule.domain_kind() == DomainKind::ClosedSimplex)
        .then(|| !averaged_exposure_inverts(rule, &Forecast::vertex(n, 0), &Forecast::vertex(n, 1), 0.5));
    let convex = has_convex_exposure(rule, n);
    let passed = if convex {
        failures == 0 && canonical_failure != Some(true)
    } else {
        canonical_failure == Some(true)
    };
    ExposureProbeReport {
        rule: *rule,
        n,
        samples,
        failures,
        failure_rate: if samples == 0 { 0.0 } else { failures as f64 / samples as f64 },
        convex_exposure: convex,
        canonical_failure,
        passed,
    }
}

fn averaged_exposure_inverts(rule: &RuleSpec, p: &Forecast, q: &Forecast, w: f64) -> bool {
    let (Ok(gp), Ok(gq)) = (exposure(rule, p), exposure(rule, q)) else {
        return false;
    };
    let target = ExposureVector::combine(p.len(), [(w, &gp), (1.0 - w, &gq)]);
    invert_exposure(rule, &target).is_ok()
}

/// Tolerance on the concavity gap of the weight-score.
pub const CONCAVITY_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcavityReport {
    pub rule: RuleSpec,
    pub n: usize,
    pub experts: usize,
    pub samples: usize,
    /// Smallest observed `WS(cv + (1-c)w) - c WS(v) - (1-c) WS(w)`.
    pub worst_gap: f64,
    pub passed: bool,
}

/// Concavity gap of the weight-score between two weight vectors.
pub fn concavity_gap(
    rule: &RuleSpec,
    forecasts: &[Forecast],
    v: &WeightVector,
    w: &WeightVector,
    c: f64,
    j: usize,
) -> Result<f64> {
    let mix: Vec<f64> = v
        .as_slice()
        .iter()
        .zip(w.as_slice())
        .map(|(a, b)| c * a + (1.0 - c) * b)
        .collect();
    let mix = WeightVector::new(mix)?;
    Ok(weight_score(rule, forecasts, &mix, j)?
        - c * weight_score(rule, forecasts, v, j)?
        - (1.0 - c) * weight_score(rule, forecasts, w, j)?)
}

/// Samples concavity triples `(v, w, c)` for random forecasts and outcomes.
pub fn concavity_probe(rule: &RuleSpec, n: usize, experts: usize, samples: usize, seed: u64) -> Result<ConcavityReport> {
    let mut worst = f64::INFINITY;
    for i in 0..samples {
        let mut rng = sample_rng(seed, i as u64);
        let forecasts: Vec<Forecast> = (0..experts).map(|_| sampling::dirichlet(&mut rng, n)).collect();
        let v = WeightVector::new(sampling::weight_vector(&mut rng, experts))?;
        let w = WeightVector::new(sampling::weight_vector(&mut rng, experts))?;
        let c = rand::Rng::random::<f64>(&mut rng);
        let j = sampling::outcome(&mut rng, n);
        worst = worst.min(concavity_gap(rule, &forecasts, &v, &w, c, j)?);
    }
    Ok(ConcavityReport {
        rule: *rule,
        n,
        experts,
        samples,
        worst_gap: worst,
        passed: samples == 0 || worst >= -CONCAVITY_TOLERANCE,
    })
}
