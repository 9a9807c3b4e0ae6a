//! Proper scoring rules through their Savage representation.
//!
//! Every rule is described by its expected reward function `G` (strictly
//! convex on the forecast domain) and the exposure function `g = ∇G`. Scores
//! are recovered from the tangent plane of `G`:
//!
//! ```text
//! s(p; j) = G(p) + <g(p), δ_j - p>
//! ```
//!
//! Exposures are only meaningful modulo the all-ones direction, so they are
//! always handed out as sum-zero [`ExposureVector`]s.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{QaError, Result};
use crate::simplex::{center, dot};

/// Inputs whose entries sum to within this of one are renormalized.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Smallest coordinate accepted by open-simplex rules.
pub const OPEN_SIMPLEX_FLOOR: f64 = 1e-300;

/// A point on the probability simplex over `n >= 2` outcomes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Forecast(Vec<f64>);

impl Forecast {
    /// Validates and renormalizes a probability vector.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(QaError::Domain(format!(
                "a forecast needs at least 2 outcomes, got {}",
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(QaError::Domain(format!("invalid probability {bad}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(QaError::Domain(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self(probs.into_iter().map(|p| p / total).collect()))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// The one-hot forecast `δ_j` (0-based).
    pub fn vertex(n: usize, j: usize) -> Self {
        let mut v = vec![0.0; n];
        v[j] = 1.0;
        Self(v)
    }

    /// Normalizes a nonnegative vector produced by a solver.
    pub(crate) fn from_mass(mass: Vec<f64>) -> Self {
        let total: f64 = mass.iter().sum();
        Self(mass.into_iter().map(|m| m.max(0.0) / total).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for Forecast {
    type Error = QaError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Forecast::new(v)
    }
}

impl From<Forecast> for Vec<f64> {
    fn from(f: Forecast) -> Self {
        f.0
    }
}

impl AsRef<[f64]> for Forecast {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Canonical sum-zero representative of an exposure modulo `1_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExposureVector(Vec<f64>);

impl ExposureVector {
    /// Canonicalizes a raw gradient by subtracting its mean.
    pub fn canonicalize(raw: &[f64]) -> Self {
        Self(center(raw))
    }

    /// Accepts a vector that is already sum-zero (within `1e-9` of its scale).
    pub fn from_sum_zero(coords: Vec<f64>) -> Result<Self> {
        let scale = coords.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        let total: f64 = coords.iter().sum();
        if total.abs() > 1e-9 * scale * coords.len() as f64 {
            return Err(QaError::Domain(format!(
                "exposure target must sum to zero, sums to {total}"
            )));
        }
        Ok(Self::canonicalize(&coords))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::simplex::norm(&self.0)
    }

    /// Weighted combination `Σ w_i e_i` of exposures of equal length.
    pub fn combine<'a, I>(n: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (f64, &'a ExposureVector)>,
    {
        let mut acc = vec![0.0; n];
        for (w, e) in terms {
            for (a, c) in acc.iter_mut().zip(&e.0) {
                *a += w * c;
            }
        }
        Self::canonicalize(&acc)
    }
}

/// Whether a rule is defined on the closed simplex or only on its interior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    ClosedSimplex,
    OpenSimplex,
}

/// Named scoring-rule families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Family {
    /// `G = Σ p_j²`
    Quadratic,
    /// `G = Σ p_j ln p_j`
    Logarithmic,
    /// `G = -Σ ln p_j`
    NegLog,
    /// `G = -Σ p_j^γ` for `γ ∈ (0,1)`, `G = Σ p_j^γ` for `γ < 0`.
    Power(f64),
    /// `G = (Σ p_j^α)^{1/α}`, `α > 1`.
    Spherical(f64),
    /// `G = Σ p_j^γ`, `γ > 1`.
    Tsallis(f64),
    /// `G = -Π p_j^{1/n}`
    Hs,
}

/// A validated scoring rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct RuleSpec {
    family: Family,
}

impl RuleSpec {
    pub fn new(family: Family) -> Result<Self> {
        match family {
            Family::Power(g) if !g.is_finite() || g == 0.0 || g >= 1.0 => Err(QaError::Config(
                format!("power rule needs γ in (0,1) or γ < 0, got {g}"),
            )),
            Family::Spherical(a) if !a.is_finite() || a <= 1.0 => Err(QaError::Config(format!(
                "spherical rule needs α > 1, got {a}"
            ))),
            Family::Tsallis(g) if !g.is_finite() || g <= 1.0 => Err(QaError::Config(format!(
                "tsallis rule needs γ > 1, got {g}"
            ))),
            _ => Ok(Self { family }),
        }
    }

    pub fn quadratic() -> Self {
        Self { family: Family::Quadratic }
    }

    pub fn logarithmic() -> Self {
        Self { family: Family::Logarithmic }
    }

    pub fn neglog() -> Self {
        Self { family: Family::NegLog }
    }

    pub fn hs() -> Self {
        Self { family: Family::Hs }
    }

    pub fn power(gamma: f64) -> Result<Self> {
        Self::new(Family::Power(gamma))
    }

    pub fn spherical(alpha: f64) -> Result<Self> {
        Self::new(Family::Spherical(alpha))
    }

    pub fn tsallis(gamma: f64) -> Result<Self> {
        Self::new(Family::Tsallis(gamma))
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn domain_kind(&self) -> DomainKind {
        match self.family {
            Family::Logarithmic | Family::NegLog | Family::Power(_) | Family::Hs => {
                DomainKind::OpenSimplex
            }
            Family::Quadratic | Family::Spherical(_) | Family::Tsallis(_) => {
                DomainKind::ClosedSimplex
            }
        }
    }

    /// True when `G` stays bounded on the closed simplex.
    pub fn has_bounded_reward(&self) -> bool {
        !matches!(self.family, Family::NegLog)
            && !matches!(self.family, Family::Power(g) if g < 0.0)
    }

    /// Checks that `p` lies in the forecast domain of this rule.
    pub fn check_domain(&self, p: &[f64]) -> Result<()> {
        if self.domain_kind() == DomainKind::OpenSimplex {
            if let Some(min) = p.iter().copied().reduce(f64::min) {
                if min < OPEN_SIMPLEX_FLOOR {
                    return Err(QaError::Domain(format!(
                        "rule {self} needs strictly positive probabilities, got minimum {min}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `G(p)` without domain checks.
    pub(crate) fn reward_value(&self, p: &[f64]) -> f64 {
        match self.family {
            Family::Quadratic => p.iter().map(|x| x * x).sum(),
            Family::Logarithmic => p
                .iter()
                .map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 })
                .sum(),
            Family::NegLog => -p.iter().map(|x| x.ln()).sum::<f64>(),
            Family::Power(g) => power_sign(g) * p.iter().map(|x| x.powf(g)).sum::<f64>(),
            Family::Spherical(a) => p.iter().map(|x| x.powf(a)).sum::<f64>().powf(1.0 / a),
            Family::Tsallis(g) => p.iter().map(|x| x.powf(g)).sum(),
            Family::Hs => -geometric_mean(p),
        }
    }

    /// Raw gradient of `G` in `R^n` without domain checks.
    pub(crate) fn raw_gradient(&self, p: &[f64]) -> Vec<f64> {
        match self.family {
            Family::Quadratic => p.iter().map(|x| 2.0 * x).collect(),
            Family::Logarithmic => p.iter().map(|x| x.ln() + 1.0).collect(),
            Family::NegLog => p.iter().map(|x| -1.0 / x).collect(),
            Family::Power(g) => {
                let k = power_sign(g) * g;
                p.iter().map(|x| k * x.powf(g - 1.0)).collect()
            }
            Family::Spherical(a) => {
                let total: f64 = p.iter().map(|x| x.powf(a)).sum();
                let scale = total.powf(1.0 / a - 1.0);
                p.iter().map(|x| scale * x.powf(a - 1.0)).collect()
            }
            Family::Tsallis(g) => p.iter().map(|x| g * x.powf(g - 1.0)).collect(),
            Family::Hs => {
                let n = p.len() as f64;
                let reward = -geometric_mean(p);
                p.iter().map(|x| reward / (n * x)).collect()
            }
        }
    }
}

/// Sign making `±Σ p^γ` convex for the power family.
pub(crate) fn power_sign(gamma: f64) -> f64 {
    if gamma < 0.0 {
        1.0
    } else {
        -1.0
    }
}

fn geometric_mean(p: &[f64]) -> f64 {
    if p.iter().any(|&x| x <= 0.0) {
        return 0.0;
    }
    let mean_log = p.iter().map(|x| x.ln()).sum::<f64>() / p.len() as f64;
    mean_log.exp()
}

fn parse_param(name: &str, raw: Option<&str>) -> Result<f64> {
    let raw = raw.ok_or_else(|| QaError::Parse(format!("rule `{name}` needs a parameter, e.g. `{name}:2`")))?;
    raw.trim()
        .parse::<f64>()
        .map_err(|e| QaError::Parse(format!("bad parameter `{raw}` for `{name}`: {e}")))
}

impl FromStr for RuleSpec {
    type Err = QaError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (name, param) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s.as_str(), None),
        };
        let no_param = |rule: RuleSpec| match param {
            Some(p) => Err(QaError::Parse(format!("rule `{name}` takes no parameter, got `{p}`"))),
            None => Ok(rule),
        };
        match name {
            "quadratic" | "quad" | "brier" => no_param(Self::quadratic()),
            "log" | "logarithmic" => no_param(Self::logarithmic()),
            "neglog" => no_param(Self::neglog()),
            "hs" => no_param(Self::hs()),
            "power" => Self::power(parse_param(name, param)?),
            "spherical" | "sph" => match param {
                None => Self::spherical(2.0),
                Some(_) => Self::spherical(parse_param(name, param)?),
            },
            "tsallis" => Self::tsallis(parse_param(name, param)?),
            other => Err(QaError::Parse(format!("unknown scoring rule `{other}`"))),
        }
    }
}

impl TryFrom<String> for RuleSpec {
    type Error = QaError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<RuleSpec> for String {
    fn from(r: RuleSpec) -> Self {
        r.to_string()
    }
}

impl fmt::Display for RuleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Quadratic => write!(f, "quadratic"),
            Family::Logarithmic => write!(f, "log"),
            Family::NegLog => write!(f, "neglog"),
            Family::Power(g) => write!(f, "power:{g}"),
            Family::Spherical(a) => write!(f, "spherical:{a}"),
            Family::Tsallis(g) => write!(f, "tsallis:{g}"),
            Family::Hs => write!(f, "hs"),
        }
    }
}

/// Expected reward `G(p)`.
pub fn expected_reward(rule: &RuleSpec, p: &Forecast) -> Result<f64> {
    rule.check_domain(p.probs())?;
    Ok(rule.reward_value(p.probs()))
}

/// Canonical exposure `g(p)`.
pub fn exposure(rule: &RuleSpec, p: &Forecast) -> Result<ExposureVector> {
    rule.check_domain(p.probs())?;
    Ok(ExposureVector::canonicalize(&rule.raw_gradient(p.probs())))
}

/// Two-outcome scalar exposure `<g(p), (1, -1)>`.
pub fn scalar_exposure(rule: &RuleSpec, p: &Forecast) -> Result<f64> {
    if p.len() != 2 {
        return Err(QaError::Domain("scalar exposure needs exactly 2 outcomes".into()));
    }
    let g = exposure(rule, p)?;
    Ok(g.coords()[0] - g.coords()[1])
}

/// Score of report `p` when outcome `j` (0-based) occurs.
pub fn score(rule: &RuleSpec, p: &Forecast, j: usize) -> Result<f64> {
    Ok(score_vector(rule, p)?[check_outcome(j, p.len())?])
}

/// Scores of report `p` for every outcome.
pub fn score_vector(rule: &RuleSpec, p: &Forecast) -> Result<Vec<f64>> {
    rule.check_domain(p.probs())?;
    let reward = rule.reward_value(p.probs());
    let g = center(&rule.raw_gradient(p.probs()));
    let tilt = dot(&g, p.probs());
    Ok(g.iter().map(|gj| reward + gj - tilt).collect())
}

/// Bregman divergence `D_G(p ‖ q)`.
pub fn bregman(rule: &RuleSpec, p: &Forecast, q: &Forecast) -> Result<f64> {
    if p.len() != q.len() {
        return Err(QaError::Domain(format!(
            "forecast lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    rule.check_domain(p.probs())?;
    rule.check_domain(q.probs())?;
    Ok(bregman_unchecked(rule, p.probs(), q.probs()))
}

pub(crate) fn bregman_unchecked(rule: &RuleSpec, p: &[f64], q: &[f64]) -> f64 {
    let gq = rule.raw_gradient(q);
    let lin: f64 = gq
        .iter()
        .zip(p.iter().zip(q))
        .map(|(g, (a, b))| g * (a - b))
        .sum();
    (rule.reward_value(p) - rule.reward_value(q) - lin).max(0.0)
}

/// Whether the range of `g` over the rule's domain is convex for `n` outcomes.
pub fn has_convex_exposure(rule: &RuleSpec, n: usize) -> bool {
    if n <= 2 {
        return true;
    }
    !matches!(rule.family(), Family::Tsallis(g) if g > 2.0)
}

pub(crate) fn check_outcome(j: usize, n: usize) -> Result<usize> {
    if j < n {
        Ok(j)
    } else {
        Err(QaError::Index { index: j, n })
    }
}
