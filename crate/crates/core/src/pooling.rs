//! Quasi-arithmetic pooling.
//!
//! The QA pool `p*` of weighted forecasts `(p_i, w_i)` is the forecast whose
//! exposure equals the normalized weighted average of the experts' exposures:
//!
//! ```text
//! g(p*) = Σ w_i g(p_i) / Σ w_i     (modulo 1_n)
//! ```
//!
//! Inversion of `g` is dispatched per family: quadratic and logarithmic rules
//! invert in closed form, the power-type, spherical and hs rules reduce to a
//! monotone scalar equation for the `1_n` shift, and any rule can fall back to
//! minimizing `G(x) - <target, x>` over the simplex. The generalized pool
//! minimizes the weighted Bregman divergence `Σ w_i D_G(x ‖ p_i)` directly and
//! is defined even where the exposure range is not convex.

use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::roots::{bisect, expand_bracket};
use crate::scoring::{ExposureVector, Family, Forecast, RuleSpec, DomainKind, power_sign};
use crate::simplex::{center, distance, dot, norm, project_onto_shell};

/// Residual bound (per unit of exposure scale) for exact inversions.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;

/// Relative slack allowed when a shift root sits exactly on the simplex boundary.
const BOUNDARY_SLACK: f64 = 1e-10;

/// Floor used for steep open-domain rules when minimizing over the simplex.
pub const STEEP_FLOOR: f64 = 1e-12;

/// A forecast with a nonnegative weight (amount of evidence).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedForecast {
    pub forecast: Forecast,
    pub weight: f64,
}

impl WeightedForecast {
    pub fn new(forecast: Forecast, weight: f64) -> Self {
        Self { forecast, weight }
    }
}

/// How a pool was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolMethod {
    ClosedForm,
    RootFind,
    ConvexMin,
    BregmanMin,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoolResult {
    pub pooled: Forecast,
    pub total_weight: f64,
    /// `‖g(pooled) - Σ ŵ_i g(p_i)‖₂` in the sum-zero space.
    pub residual: f64,
    pub method: PoolMethod,
}

impl PoolResult {
    pub fn into_weighted(self) -> WeightedForecast {
        WeightedForecast::new(self.pooled, self.total_weight)
    }
}

/// Selects the inversion route used by [`qa_pool_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inversion {
    /// Per-family closed form or scalar root.
    Fast,
    /// Convex minimization of `G(x) - <target, x>`.
    Generic,
}

/// Inputs with zero weights removed and weights normalized.
pub(crate) struct Prepared<'a> {
    pub n: usize,
    pub total_weight: f64,
    pub members: Vec<(f64, &'a Forecast)>,
}

pub(crate) fn prepare<'a>(rule: &RuleSpec, inputs: &'a [WeightedForecast]) -> Result<Prepared<'a>> {
    let first = inputs
        .first()
        .ok_or_else(|| QaError::Degenerate("no forecasts to pool".into()))?;
    let n = first.forecast.len();
    let mut total = 0.0;
    for item in inputs {
        if item.forecast.len() != n {
            return Err(QaError::Domain(format!(
                "forecasts disagree on outcome count: {} vs {n}",
                item.forecast.len()
            )));
        }
        if !item.weight.is_finite() || item.weight < 0.0 {
            return Err(QaError::Domain(format!("invalid weight {}", item.weight)));
        }
        if item.weight > 0.0 {
            rule.check_domain(item.forecast.probs())?;
            total += item.weight;
        }
    }
    if total <= 0.0 {
        return Err(QaError::Degenerate("all weights are zero".into()));
    }
    let members = inputs
        .iter()
        .filter(|item| item.weight > 0.0)
        .map(|item| (item.weight / total, &item.forecast))
        .collect();
    Ok(Prepared { n, total_weight: total, members })
}

/// Normalized weighted average of canonical exposures.
pub(crate) fn average_exposure(rule: &RuleSpec, prepared: &Prepared<'_>) -> ExposureVector {
    let mut acc = vec![0.0; prepared.n];
    for (w, p) in &prepared.members {
        for (a, g) in acc.iter_mut().zip(center(&rule.raw_gradient(p.probs()))) {
            *a += w * g;
        }
    }
    ExposureVector::canonicalize(&acc)
}

/// Normalized weighted average of raw gradients. Any representative of the
/// target class works for inversion; skipping the centering avoids cancellation
/// when one coordinate dominates.
fn raw_average(rule: &RuleSpec, prepared: &Prepared<'_>) -> Vec<f64> {
    let mut acc = vec![0.0; prepared.n];
    for (w, p) in &prepared.members {
        for (a, g) in acc.iter_mut().zip(rule.raw_gradient(p.probs())) {
            *a += w * g;
        }
    }
    acc
}

fn exposure_residual(rule: &RuleSpec, x: &[f64], target: &ExposureVector) -> f64 {
    let g = center(&rule.raw_gradient(x));
    distance(&g, target.coords())
}

fn residual_scale(target: &ExposureVector) -> f64 {
    target.coords().iter().fold(1.0f64, |m, c| m.max(c.abs()))
}

/// QA pool using the fastest available inversion.
pub fn qa_pool(rule: &RuleSpec, inputs: &[WeightedForecast]) -> Result<PoolResult> {
    qa_pool_with(rule, inputs, Inversion::Fast)
}

pub fn qa_pool_with(rule: &RuleSpec, inputs: &[WeightedForecast], route: Inversion) -> Result<PoolResult> {
    let prepared = prepare(rule, inputs)?;
    let target = average_exposure(rule, &prepared);
    let (pooled, method) = match route {
        Inversion::Fast => invert_fast(rule, &raw_average(rule, &prepared))?,
        Inversion::Generic => (invert_exposure_generic(rule, &target)?, PoolMethod::ConvexMin),
    };
    let residual = exposure_residual(rule, pooled.probs(), &target);
    if residual > RESIDUAL_TOLERANCE * residual_scale(&target) {
        return Err(QaError::Convergence(format!(
            "inversion residual {residual:e} exceeds tolerance for rule {rule}"
        )));
    }
    Ok(PoolResult {
        pooled,
        total_weight: prepared.total_weight,
        residual,
        method,
    })
}

/// Binary pooling operator on weighted forecasts.
pub fn combine(rule: &RuleSpec, a: &WeightedForecast, b: &WeightedForecast) -> Result<WeightedForecast> {
    Ok(qa_pool(rule, &[a.clone(), b.clone()])?.into_weighted())
}

/// Solves `g(x) = target` (modulo `1_n`).
pub fn invert_exposure(rule: &RuleSpec, target: &ExposureVector) -> Result<Forecast> {
    invert_fast(rule, target.coords()).map(|(f, _)| f)
}

/// `t` may be any representative of the target modulo `1_n`.
fn invert_fast(rule: &RuleSpec, t: &[f64]) -> Result<(Forecast, PoolMethod)> {
    if t.len() < 2 {
        return Err(QaError::Domain("exposure target needs at least 2 coordinates".into()));
    }
    let n = t.len() as f64;
    match rule.family() {
        Family::Quadratic => {
            let x: Vec<f64> = center(t).iter().map(|v| 0.5 * v + 1.0 / n).collect();
            let min = x.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -BOUNDARY_SLACK {
                return Err(range_error(rule, "the linear preimage leaves the simplex"));
            }
            Ok((Forecast::from_mass(x), PoolMethod::ClosedForm))
        }
        Family::Logarithmic => {
            let max = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let x = t.iter().map(|v| (v - max).exp()).collect();
            Ok((Forecast::from_mass(x), PoolMethod::ClosedForm))
        }
        Family::NegLog => invert_power_type(rule, -1.0, -1.0, t),
        Family::Power(g) => invert_power_type(rule, power_sign(g) * g, g - 1.0, t),
        Family::Tsallis(g) => invert_power_type(rule, g, g - 1.0, t),
        Family::Spherical(a) => {
            let (point, _) = shift_onto_sphere(rule, t, a / (a - 1.0))?;
            let x = point.iter().map(|v| v.powf(1.0 / (a - 1.0))).collect();
            Ok((Forecast::from_mass(x), PoolMethod::RootFind))
        }
        Family::Hs => invert_hs(t),
    }
}

fn range_error(rule: &RuleSpec, detail: &str) -> QaError {
    QaError::ExposureRange(format!(
        "rule {rule}: no forecast attains the averaged exposure ({detail})"
    ))
}

/// Inverts `g_j(x) = k · x_j^e` up to a shift `c`, choosing `c` so that the
/// preimage sums to one.
fn invert_power_type(rule: &RuleSpec, k: f64, e: f64, t: &[f64]) -> Result<(Forecast, PoolMethod)> {
    let (x, _) = solve_power_shift(k, e, t).map_err(|_| range_error(rule, "the shift root leaves the simplex"))?;
    Ok((Forecast::from_mass(x), PoolMethod::RootFind))
}

/// Finds `c` with `Σ ((t_j + c)/k)^{1/e} = 1`; returns the preimage and `c`.
fn solve_power_shift(k: f64, e: f64, t: &[f64]) -> std::result::Result<(Vec<f64>, f64), ()> {
    let inv = 1.0 / e;
    let mass = |c: f64| -> f64 {
        t.iter()
            .map(|tj| {
                let u = (tj + c) / k;
                if u <= 0.0 {
                    if inv > 0.0 { 0.0 } else { f64::INFINITY }
                } else {
                    u.powf(inv)
                }
            })
            .sum::<f64>()
            - 1.0
    };
    let c = if k > 0.0 {
        // mass is increasing on [-min t, ∞); preimage coordinates vanish at the left end.
        let lo = -t.iter().copied().fold(f64::INFINITY, f64::min);
        let at_lo = mass(lo);
        if at_lo > BOUNDARY_SLACK {
            return Err(());
        }
        if at_lo >= -BOUNDARY_SLACK {
            lo
        } else {
            let hi = expand_bracket(&mass, lo, 1.0, 1.0).map_err(|_| ())?;
            bisect(&mass, lo, hi)
        }
    } else {
        // k < 0 and e < 0: mass runs from 0 at -∞ to a pole at -max t.
        let hi = -t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = expand_bracket(&mass, hi, -1.0, 1.0).map_err(|_| ())?;
        bisect(&mass, lo, hi)
    };
    let mut x: Vec<f64> = t
        .iter()
        .map(|tj| {
            let u = (tj + c) / k;
            if u <= 0.0 { 0.0 } else { u.powf(inv) }
        })
        .collect();
    absorb_mass_defect(&mut x);
    Ok((x, c))
}

/// Moves `1 - Σx` into the largest coordinate. `c` is only resolved to its
/// own ulp, and rescaling the whole vector instead would perturb the steep
/// coordinates' exposures by a relative amount of that size.
fn absorb_mass_defect(x: &mut [f64]) {
    let defect = 1.0 - x.iter().sum::<f64>();
    if let Some(big) = x.iter_mut().max_by(|a, b| a.total_cmp(b)) {
        *big = (*big + defect).max(0.0);
    }
}

/// Shifts `v` along `1_n` onto the nonnegative part of the unit β-sphere.
fn shift_onto_sphere(rule: &RuleSpec, v: &[f64], beta: f64) -> Result<(Vec<f64>, f64)> {
    let excess = |c: f64| -> f64 {
        v.iter().map(|x| (x + c).max(0.0).powf(beta)).sum::<f64>() - 1.0
    };
    let lo = -v.iter().copied().fold(f64::INFINITY, f64::min);
    let at_lo = excess(lo);
    if at_lo > BOUNDARY_SLACK {
        return Err(range_error(rule, "the averaged exposure lies outside the β-ball"));
    }
    let c = if at_lo >= -BOUNDARY_SLACK {
        lo
    } else {
        let hi = expand_bracket(&excess, lo, 1.0, 1.0)?;
        bisect(&excess, lo, hi)
    };
    Ok((v.iter().map(|x| (x + c).max(0.0)).collect(), c))
}

/// Inverts the hs exposure `g_j = -GM(x) / (n x_j)`.
///
/// With `a_j = -1/(t_j + c)` the preimage is `a / Σ a`, and consistency forces
/// `GM(a) = n`, i.e. `Σ ln(-(t_j + c)) = -n ln n` for `c < -max t`.
fn invert_hs(t: &[f64]) -> Result<(Forecast, PoolMethod)> {
    let n = t.len() as f64;
    let f = |c: f64| -> f64 {
        -t.iter().map(|tj| (-(tj + c)).ln()).sum::<f64>() - n * n.ln()
    };
    let hi = -t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = expand_bracket(&f, hi, -1.0, 1.0)?;
    let c = bisect(f, lo, hi);
    let a = t.iter().map(|tj| -1.0 / (tj + c)).collect();
    Ok((Forecast::from_mass(a), PoolMethod::RootFind))
}

/// Result of [`tsallis_invert`].
#[derive(Clone, Debug, PartialEq)]
pub struct TsallisInversion {
    pub forecast: Forecast,
    /// The additive constant `c` of the shifted power mean.
    pub shift: f64,
}

/// Solves `Σ_j (v_j + c)^{1/(γ-1)} = 1` and returns `x_j = (v_j + c)^{1/(γ-1)}`.
///
/// `v` is the weighted average of the raw powers `p_{i,j}^{γ-1}`.
pub fn tsallis_invert(gamma: f64, v: &[f64]) -> Result<TsallisInversion> {
    if !(gamma > 1.0) {
        return Err(QaError::Config(format!("tsallis rule needs γ > 1, got {gamma}")));
    }
    if v.len() < 2 {
        return Err(QaError::Domain("need at least 2 coordinates".into()));
    }
    if v.iter().any(|x| !x.is_finite() || *x < 0.0 || *x > 1.0) {
        return Err(QaError::Domain("averaged powers must lie in [0, 1]".into()));
    }
    let (x, shift) = solve_power_shift(1.0, gamma - 1.0, v).map_err(|_| {
        QaError::ExposureRange(format!(
            "tsallis:{gamma} needs a negative shift that drives a coordinate below zero"
        ))
    })?;
    Ok(TsallisInversion {
        forecast: Forecast::from_mass(x),
        shift,
    })
}

/// Geometric QA pooling for the spherical rule.
///
/// Each forecast is mapped onto the unit β-sphere (`β = α/(α-1)`), the points
/// are averaged, the average is pushed along `+1_n` back onto the sphere, and
/// the result is mapped to the simplex by `p_j ∝ x_j^{1/(α-1)}`.
pub fn spherical_pool(alpha: f64, inputs: &[WeightedForecast]) -> Result<PoolResult> {
    let rule = RuleSpec::spherical(alpha)?;
    let prepared = prepare(&rule, inputs)?;
    let beta = alpha / (alpha - 1.0);
    let mut avg = vec![0.0; prepared.n];
    for (w, p) in &prepared.members {
        let total: f64 = p.probs().iter().map(|x| x.powf(alpha)).sum();
        let scale = total.powf(1.0 / alpha - 1.0);
        for (a, x) in avg.iter_mut().zip(p.probs()) {
            *a += w * scale * x.powf(alpha - 1.0);
        }
    }
    let (on_sphere, _) = shift_onto_sphere(&rule, &avg, beta)?;
    let pooled = Forecast::from_mass(on_sphere.iter().map(|x| x.powf(1.0 / (alpha - 1.0))).collect());
    let target = average_exposure(&rule, &prepared);
    let residual = exposure_residual(&rule, pooled.probs(), &target);
    Ok(PoolResult {
        pooled,
        total_weight: prepared.total_weight,
        residual,
        method: PoolMethod::RootFind,
    })
}

/// Options for the projected-gradient solver behind [`generalized_pool_with`].
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedOptions {
    /// Lower bound on every coordinate. Required for rules whose `G` diverges
    /// at the boundary (`neglog`, `power` with `γ < 0`).
    pub floor: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for GeneralizedOptions {
    fn default() -> Self {
        Self {
            floor: None,
            tolerance: 1e-8,
            max_iterations: 100_000,
        }
    }
}

/// Generalized QA pool: the minimizer of `Σ ŵ_i D_G(x ‖ p_i)` over the domain.
pub fn generalized_pool(rule: &RuleSpec, inputs: &[WeightedForecast]) -> Result<PoolResult> {
    generalized_pool_with(rule, inputs, &GeneralizedOptions::default())
}

pub fn generalized_pool_with(
    rule: &RuleSpec,
    inputs: &[WeightedForecast],
    options: &GeneralizedOptions,
) -> Result<PoolResult> {
    let prepared = prepare(rule, inputs)?;
    let floor = effective_floor(rule, prepared.n, options.floor)?;
    let target = average_exposure(rule, &prepared);

    let mut start = vec![0.0; prepared.n];
    for (w, p) in &prepared.members {
        for (s, x) in start.iter_mut().zip(p.probs()) {
            *s += w * x;
        }
    }
    let outcome = minimize_linear_tilt(rule, &target, start, floor, options.tolerance, options.max_iterations);
    if outcome.stationarity > 10.0 * options.tolerance {
        return Err(QaError::Convergence(format!(
            "generalized pool stopped at stationarity {:e} after {} iterations",
            outcome.stationarity, outcome.iterations
        )));
    }
    let pooled = Forecast::from_mass(outcome.x);
    let residual = exposure_residual(rule, pooled.probs(), &target);
    Ok(PoolResult {
        pooled,
        total_weight: prepared.total_weight,
        residual,
        method: PoolMethod::BregmanMin,
    })
}

fn effective_floor(rule: &RuleSpec, n: usize, requested: Option<f64>) -> Result<f64> {
    let floor = match (requested, rule.domain_kind()) {
        (Some(f), _) => f,
        (None, DomainKind::ClosedSimplex) => 0.0,
        (None, DomainKind::OpenSimplex) if rule.has_bounded_reward() => STEEP_FLOOR,
        (None, DomainKind::OpenSimplex) => {
            return Err(QaError::Domain(format!(
                "rule {rule} is unbounded at the simplex boundary; supply an interior floor"
            )))
        }
    };
    if !(floor >= 0.0) || floor * n as f64 >= 1.0 {
        return Err(QaError::Domain(format!("floor {floor} leaves no feasible forecast")));
    }
    if rule.domain_kind() == DomainKind::OpenSimplex && floor <= 0.0 {
        return Err(QaError::Domain(format!("rule {rule} needs a positive floor")));
    }
    Ok(floor)
}

/// First-order optimality measure `‖x - P(x - ∇d(x))‖₂` of
/// `d(x) = G(x) - <target, x>` over `{x ≥ floor, Σx = 1}`.
pub fn stationarity(rule: &RuleSpec, x: &[f64], target: &ExposureVector, floor: f64) -> f64 {
    let grad: Vec<f64> = rule
        .raw_gradient(x)
        .iter()
        .zip(target.coords())
        .map(|(g, t)| g - t)
        .collect();
    let trial: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - g).collect();
    distance(x, &project_onto_shell(&trial, floor))
}

/// Solves `g(x) = target` by minimizing `G(x) - <target, x>` over the simplex.
pub fn invert_exposure_generic(rule: &RuleSpec, target: &ExposureVector) -> Result<Forecast> {
    let n = target.len();
    if n < 2 {
        return Err(QaError::Domain("exposure target needs at least 2 coordinates".into()));
    }
    let floor = match rule.domain_kind() {
        DomainKind::ClosedSimplex => 0.0,
        DomainKind::OpenSimplex => STEEP_FLOOR,
    };
    let outcome = minimize_linear_tilt(rule, target, vec![1.0 / n as f64; n], floor, 1e-11, 100_000);
    let residual = exposure_residual(rule, &outcome.x, target);
    let scale = residual_scale(target);
    if residual <= RESIDUAL_TOLERANCE * scale {
        return Ok(Forecast::from_mass(outcome.x));
    }
    if outcome.stationarity <= 1e-8 {
        // optimal on a boundary face whose gradient does not match the target
        return Err(range_error(rule, "the tilted minimizer sits on a boundary face"));
    }
    Err(QaError::Convergence(format!(
        "generic inversion stopped at stationarity {:e}, residual {residual:e}",
        outcome.stationarity
    )))
}

fn minimize_linear_tilt(
    rule: &RuleSpec,
    target: &ExposureVector,
    start: Vec<f64>,
    floor: f64,
    tolerance: f64,
    max_iterations: usize,
) -> SolveOutcome {
    let t = target.coords();
    let objective = |x: &[f64]| rule.reward_value(x) - dot(t, x);
    let gradient = |x: &[f64]| -> Vec<f64> {
        rule.raw_gradient(x).iter().zip(t).map(|(g, v)| g - v).collect()
    };
    minimize_on_shell(objective, gradient, start, floor, tolerance, max_iterations)
}

/// Outcome of [`minimize_on_shell`].
#[derive(Clone, Debug)]
pub(crate) struct SolveOutcome {
    pub x: Vec<f64>,
    pub stationarity: f64,
    pub iterations: usize,
}

/// Spectral projected gradient on `{x ≥ floor, Σx = 1}` with Armijo backtracking.
pub(crate) fn minimize_on_shell<F, G>(
    objective: F,
    gradient: G,
    start: Vec<f64>,
    floor: f64,
    tolerance: f64,
    max_iterations: usize,
) -> SolveOutcome
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    const ARMIJO_C1: f64 = 1e-4;
    const MAX_HALVINGS: usize = 60;
    const NOISE_ULPS: f64 = 64.0;

    let measure = |x: &[f64], g: &[f64]| {
        let trial: Vec<f64> = x.iter().zip(g).map(|(a, b)| a - b).collect();
        distance(x, &project_onto_shell(&trial, floor))
    };

    // Only the sum-zero part of the gradient matters on the shell; dropping the
    // component along 1 keeps it from amplifying the rounding in Σd.
    let gradient = |x: &[f64]| center(&gradient(x));

    let mut x = project_onto_shell(&start, floor);
    let mut fx = objective(&x);
    let mut gx = gradient(&x);
    let mut step = 1.0 / norm(&gx).max(1.0);
    let mut stat = measure(&x, &gx);
    let mut iterations = 0;

    while iterations < max_iterations && stat > tolerance {
        iterations += 1;
        let trial: Vec<f64> = x.iter().zip(&gx).map(|(a, g)| a - step * g).collect();
        let d: Vec<f64> = project_onto_shell(&trial, floor)
            .iter()
            .zip(&x)
            .map(|(p, a)| p - a)
            .collect();
        let slope = dot(&gx, &d);
        if !(slope < 0.0) {
            break;
        }
        // Near the optimum the Armijo decrease drops below the rounding noise
        // of f; there the approximate condition of Hager and Zhang is used:
        // f within noise of f(x) and the slope along d not strongly positive.
        let noise = NOISE_ULPS * f64::EPSILON * fx.abs().max(1.0);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<f64> = x
                .iter()
                .zip(&d)
                .map(|(a, b)| (a + lambda * b).max(floor))
                .collect();
            let fc = objective(&candidate);
            if fc.is_finite() && fc <= fx + ARMIJO_C1 * lambda * slope {
                accepted = Some((candidate, fc, None));
                break;
            }
            if fc.is_finite() && fc <= fx + noise {
                let gc = gradient(&candidate);
                if dot(&gc, &d) <= (2.0 * ARMIJO_C1 - 1.0) * slope {
                    accepted = Some((candidate, fc, Some(gc)));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((next, f_next, g_next)) = accepted else {
            break;
        };
        let g_next = g_next.unwrap_or_else(|| gradient(&next));
        let s: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&gx).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        step = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(1e-14, 1e14)
        } else {
            (step * 2.0).min(1e14)
        };
        x = next;
        fx = f_next;
        gx = g_next;
        stat = measure(&x, &gx);
    }
    SolveOutcome { x, stationarity: stat, iterations }
}

/// Weighted arithmetic mean of the forecasts (linear opinion pool).
pub fn linear_pool(inputs: &[WeightedForecast]) -> Result<Forecast> {
    let prepared = prepare(&RuleSpec::quadratic(), inputs)?;
    let mut acc = vec![0.0; prepared.n];
    for (w, p) in &prepared.members {
        for (a, x) in acc.iter_mut().zip(p.probs()) {
            *a += w * x;
        }
    }
    Ok(Forecast::from_mass(acc))
}

/// Normalized weighted geometric mean (logarithmic opinion pool).
pub fn logarithmic_pool(inputs: &[WeightedForecast]) -> Result<Forecast> {
    let prepared = prepare(&RuleSpec::logarithmic(), inputs)?;
    let mut acc = vec![0.0; prepared.n];
    for (w, p) in &prepared.members {
        for (a, x) in acc.iter_mut().zip(p.probs()) {
            *a += w * x.ln();
        }
    }
    let max = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Forecast::from_mass(acc.iter().map(|a| (a - max).exp()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::exposure;

    fn wf(p: &[f64], w: f64) -> WeightedForecast {
        WeightedForecast::new(Forecast::new(p.to_vec()).unwrap(), w)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn quadratic_pool_is_linear() {
        let r = qa_pool(&RuleSpec::quadratic(), &[wf(&[0.1, 0.9], 0.5), wf(&[0.5, 0.5], 0.5)]).unwrap();
        assert!(close(r.pooled.probs(), &[0.3, 0.7], 1e-15));
        assert_eq!(r.method, PoolMethod::ClosedForm);
        assert_eq!(r.total_weight, 1.0);
    }

    #[test]
    fn log_pool_is_geometric() {
        let r = qa_pool(&RuleSpec::logarithmic(), &[wf(&[0.1, 0.9], 0.5), wf(&[0.5, 0.5], 0.5)]).unwrap();
        assert!(close(r.pooled.probs(), &[0.25, 0.75], 1e-14));
    }

    #[test]
    fn tsallis_three_symmetric_pair() {
        let rule = RuleSpec::tsallis(3.0).unwrap();
        let r = qa_pool(&rule, &[wf(&[0.8, 0.2], 0.5), wf(&[0.2, 0.8], 0.5)]).unwrap();
        assert!(close(r.pooled.probs(), &[0.5, 0.5], 1e-14));
    }

    #[test]
    fn idempotent_for_every_family() {
        let p = [0.2, 0.3, 0.5];
        for s in ["quadratic", "log", "neglog", "power:0.5", "power:-1", "spherical:2", "spherical:3", "tsallis:1.5", "tsallis:3", "hs"] {
            let rule: RuleSpec = s.parse().unwrap();
            let r = qa_pool(&rule, &[wf(&p, 1.0), wf(&p, 2.0)]).unwrap();
            assert!(close(r.pooled.probs(), &p, 1e-12), "{s}: {:?}", r.pooled);
            assert_eq!(r.total_weight, 3.0);
        }
    }

    #[test]
    fn inversion_examples() {
        let target = ExposureVector::from_sum_zero(vec![0.4, -0.4]).unwrap();
        let p = invert_exposure(&RuleSpec::quadratic(), &target).unwrap();
        assert!(close(p.probs(), &[0.7, 0.3], 1e-15));

        for s in ["quadratic", "log", "neglog", "power:0.5", "spherical:2", "tsallis:1.5", "hs"] {
            let rule: RuleSpec = s.parse().unwrap();
            let p = invert_exposure(&rule, &ExposureVector::zeros(4)).unwrap();
            assert!(close(p.probs(), &[0.25; 4], 1e-14), "{s}");
        }
    }

    #[test]
    fn tsallis_three_vertex_average_is_out_of_range() {
        let rule = RuleSpec::tsallis(3.0).unwrap();
        let a = exposure(&rule, &Forecast::vertex(3, 0)).unwrap();
        let b = exposure(&rule, &Forecast::vertex(3, 1)).unwrap();
        let target = ExposureVector::combine(3, [(0.5, &a), (0.5, &b)]);
        assert!(matches!(invert_exposure(&rule, &target), Err(QaError::ExposureRange(_))));
        assert!(matches!(invert_exposure_generic(&rule, &target), Err(QaError::ExposureRange(_))));
    }

    #[test]
    fn tsallis_invert_examples() {
        let r = tsallis_invert(2.0, &[0.3, 0.7]).unwrap();
        assert!(close(r.forecast.probs(), &[0.3, 0.7], 1e-15));
        assert!(r.shift.abs() < 1e-15);

        // 2·sqrt(0.34 + c) = 1  ⇒  c = 0.25 - 0.34
        let r = tsallis_invert(3.0, &[0.34, 0.34]).unwrap();
        assert!(close(r.forecast.probs(), &[0.5, 0.5], 1e-15));
        assert!((r.shift + 0.09).abs() < 1e-14);

        assert!(matches!(tsallis_invert(3.0, &[0.5, 0.5, 0.0]), Err(QaError::ExposureRange(_))));
        assert!(tsallis_invert(1.0, &[0.5, 0.5]).is_err());
    }

    #[test]
    fn spherical_pool_examples() {
        let r = spherical_pool(2.0, &[wf(&[1.0, 0.0], 0.5), wf(&[0.0, 1.0], 0.5)]).unwrap();
        assert!(close(r.pooled.probs(), &[0.5, 0.5], 1e-15));
        let r = spherical_pool(2.0, &[wf(&[1.0, 0.0], 1.0)]).unwrap();
        assert!(close(r.pooled.probs(), &[1.0, 0.0], 1e-15));

        let inputs = [wf(&[1.0, 0.0], 0.75), wf(&[0.0, 1.0], 0.25)];
        let geometric = spherical_pool(2.0, &inputs).unwrap();
        let generic = qa_pool_with(&RuleSpec::spherical(2.0).unwrap(), &inputs, Inversion::Generic).unwrap();
        assert!(close(geometric.pooled.probs(), generic.pooled.probs(), 1e-8));
        assert_eq!(generic.method, PoolMethod::ConvexMin);
        assert!(matches!(spherical_pool(2.0, &[wf(&[1.0, 0.0], 0.0)]), Err(QaError::Degenerate(_))));
    }

    #[test]
    fn zero_weights_are_dropped() {
        let rule = RuleSpec::logarithmic();
        // a zero-weight forecast outside the open domain is ignored
        let r = qa_pool(&rule, &[wf(&[0.3, 0.7], 2.0), wf(&[1.0, 0.0], 0.0)]).unwrap();
        assert!(close(r.pooled.probs(), &[0.3, 0.7], 1e-15));
        assert!(matches!(qa_pool(&rule, &[wf(&[0.3, 0.7], 0.0)]), Err(QaError::Degenerate(_))));
    }

    #[test]
    fn log_pool_of_opposite_vertices_is_domain_error() {
        let r = qa_pool(&RuleSpec::logarithmic(), &[wf(&[1.0, 0.0], 0.5), wf(&[0.0, 1.0], 0.5)]);
        assert!(matches!(r, Err(QaError::Domain(_))));
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let r = qa_pool(&RuleSpec::quadratic(), &[wf(&[0.5, 0.5], 1.0), wf(&[0.2, 0.3, 0.5], 1.0)]);
        assert!(matches!(r, Err(QaError::Domain(_))));
        assert!(matches!(qa_pool(&RuleSpec::quadratic(), &[]), Err(QaError::Degenerate(_))));
    }

    #[test]
    fn generalized_matches_closed_form() {
        let inputs = [wf(&[0.1, 0.9], 0.5), wf(&[0.5, 0.5], 0.5)];
        let r = generalized_pool(&RuleSpec::quadratic(), &inputs).unwrap();
        assert!(close(r.pooled.probs(), &[0.3, 0.7], 1e-8));
        assert_eq!(r.method, PoolMethod::BregmanMin);
        let p = [0.2, 0.3, 0.5];
        let r = generalized_pool(&RuleSpec::tsallis(3.0).unwrap(), &[wf(&p, 1.0), wf(&p, 3.0)]).unwrap();
        assert!(close(r.pooled.probs(), &p, 1e-8));
    }

    #[test]
    fn generalized_needs_floor_for_unbounded_rules() {
        let inputs = [wf(&[0.1, 0.9], 0.5), wf(&[0.5, 0.5], 0.5)];
        assert!(matches!(generalized_pool(&RuleSpec::neglog(), &inputs), Err(QaError::Domain(_))));
        let options = GeneralizedOptions { floor: Some(1e-6), ..Default::default() };
        let g = generalized_pool_with(&RuleSpec::neglog(), &inputs, &options).unwrap();
        let q = qa_pool(&RuleSpec::neglog(), &inputs).unwrap();
        assert!(close(g.pooled.probs(), q.pooled.probs(), 1e-7));
    }
}
