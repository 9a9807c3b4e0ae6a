//! Command implementations and file formats behind the `qapool` binary.
//!
//! Every command writes a single JSON document to stdout. Exit codes:
//! 0 success, 1 usage or input error, 2 exposure out of range, 3 solver
//! non-convergence, 4 an audit or probe check failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{
    axiom_suite, concavity_probe, exposure_probe, surplus_report_at, AxiomReport, ConcavityReport,
    ExposureProbeReport,
};
use crate::error::QaError;
use crate::learning::{adversarial_stream, iid_truthful_stream, ogd_run, LearningConfig, RegretReport, Step};
use crate::pooling::{generalized_pool_with, qa_pool, GeneralizedOptions, PoolMethod, WeightedForecast};
use crate::scoring::{bregman, exposure, expected_reward, has_convex_exposure, score_vector, Forecast, RuleSpec};

pub const EXIT_INPUT: i32 = 1;
pub const EXIT_EXPOSURE_RANGE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_CHECK_FAILED: i32 = 4;

/// A failed command: the message for stderr and the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<QaError> for CliError {
    fn from(err: QaError) -> Self {
        let code = match err {
            QaError::ExposureRange(_) => EXIT_EXPOSURE_RANGE,
            QaError::Convergence(_) => EXIT_CONVERGENCE,
            _ => EXIT_INPUT,
        };
        Self { code, message: err.to_string() }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Successful command output.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub json: String,
    /// Nonzero when the command ran but a reported check failed.
    pub code: i32,
}

#[derive(Parser, Debug)]
#[command(name = "qapool", version, about = "Quasi-arithmetic opinion pooling under proper scoring rules")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pool expert forecasts read from a JSON or CSV file.
    Pool(PoolArgs),
    /// Score a forecast.
    Score(ScoreArgs),
    /// Bregman divergence D_G(p ‖ q).
    Bregman(BregmanArgs),
    /// Run online gradient descent over expert weights.
    Learn(LearnArgs),
    /// Run the axiom suite, exposure probe and concavity probe.
    Audit(AuditArgs),
    /// Test whether averaged exposures can be inverted.
    ProbeExposure(ProbeArgs),
}

/// Comma-separated probability vector, e.g. `0.3,0.7`.
#[derive(Clone, Debug, PartialEq)]
pub struct Probs(pub Vec<f64>);

impl FromStr for Probs {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Probs)
    }
}

fn parse_rule(s: &str) -> std::result::Result<RuleSpec, String> {
    s.parse::<RuleSpec>().map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
pub struct PoolArgs {
    /// Scoring rule: quadratic, log, neglog, hs, power:γ, spherical:β or tsallis:γ.
    #[arg(value_parser = parse_rule)]
    pub rule: RuleSpec,
    /// Forecast file (JSON, or CSV by extension).
    pub input: PathBuf,
    /// Minimize the weighted Bregman divergence instead of inverting the exposure.
    #[arg(long)]
    pub generalized: bool,
    /// Override the file's weights.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    /// Interior floor for the generalized pool (required for neglog and power:γ<0).
    #[arg(long)]
    pub floor: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Scoring rule: quadratic, log, neglog, hs, power:γ, spherical:β or tsallis:γ.
    #[arg(value_parser = parse_rule)]
    pub rule: RuleSpec,
    /// Comma-separated probabilities, e.g. 0.7,0.3.
    pub forecast: Probs,
    /// Realized outcome, 1-based.
    #[arg(long)]
    pub outcome: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BregmanArgs {
    /// Scoring rule: quadratic, log, neglog, hs, power:γ, spherical:β or tsallis:γ.
    #[arg(value_parser = parse_rule)]
    pub rule: RuleSpec,
    /// Comma-separated probabilities.
    pub p: Probs,
    pub q: Probs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Synthetic {
    /// Expert 1 is truthful; outcomes drawn from its forecast.
    Iid,
    /// Outcomes chosen to minimize the learner's score.
    Adversarial,
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    /// Scoring rule: quadratic, log, neglog, hs, power:γ, spherical:β or tsallis:γ.
    #[arg(value_parser = parse_rule)]
    pub rule: RuleSpec,
    /// Stream file; omit when using --synthetic.
    #[arg(required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub stream: Option<PathBuf>,
    /// Bound on the exposure norm; required for open-domain rules.
    #[arg(long = "M")]
    pub exposure_bound: Option<f64>,
    #[arg(long, env = "QAPOOL_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the regret curve (t, cumulative_regret, bound) as CSV.
    #[arg(long)]
    pub emit_curve: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub synthetic: Option<Synthetic>,
    #[arg(long, default_value_t = 5)]
    pub experts: usize,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Number of rounds; truncates a stream file, defaults to 1000 for synthetic streams.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Write the generated synthetic stream.
    #[arg(long, requires = "synthetic")]
    pub save_stream: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AuditArgs {
    /// Scoring rule: quadratic, log, neglog, hs, power:γ, spherical:β or tsallis:γ.
    #[arg(value_parser = parse_rule)]
    pub rule: RuleSpec,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, env = "QAPOOL_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    /// Scoring rule: quadratic, log, neglog, hs, power:γ, spherical:β or tsallis:γ.
    #[arg(value_parser = parse_rule)]
    pub rule: RuleSpec,
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, env = "QAPOOL_SEED", default_value_t = 0)]
    pub seed: u64,
}

// ---------------------------------------------------------------------------
// file formats

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub forecast: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

/// Expert forecasts with optional weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForecastFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub experts: Vec<ExpertEntry>,
}

impl ForecastFile {
    /// Reads JSON, or CSV when the extension is `.csv`.
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        let is_csv = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        let file = if is_csv {
            Self::from_csv(&text)?
        } else {
            Self::from_json(&text)?
        };
        file.validate()?;
        Ok(file)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::input(format!("invalid forecast file: {e}")))
    }

    /// Rows are experts. A header row is detected by a non-numeric cell; in a
    /// header, a leading `id` column names the experts and a trailing
    /// `weight` column carries weights, the remaining names become labels.
    pub fn from_csv(text: &str) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| CliError::input(format!("invalid CSV: {e}")))?;
            rows.push(record.iter().map(str::to_owned).collect::<Vec<_>>());
        }
        let header = match rows.first() {
            Some(first) if first.iter().any(|c| c.parse::<f64>().is_err()) => Some(rows.remove(0)),
            _ => None,
        };
        let (has_id, has_weight, labels) = match &header {
            Some(h) => {
                let has_id = h.first().is_some_and(|c| c.eq_ignore_ascii_case("id"));
                let has_weight = h.len() > 1 && h.last().is_some_and(|c| c.eq_ignore_ascii_case("weight"));
                let lo = usize::from(has_id);
                let hi = h.len() - usize::from(has_weight);
                (has_id, has_weight, Some(h[lo..hi].to_vec()))
            }
            None => (false, false, None),
        };
        let experts = rows
            .into_iter()
            .enumerate()
            .map(|(i, row)| {
                let mut cells = row.as_slice();
                let id = if has_id {
                    let (first, rest) = cells
                        .split_first()
                        .ok_or_else(|| CliError::input(format!("row {} is empty", i + 1)))?;
                    cells = rest;
                    Some(first.clone())
                } else {
                    None
                };
                let number = |c: &String| {
                    c.parse::<f64>()
                        .map_err(|e| CliError::input(format!("row {}: `{c}`: {e}", i + 1)))
                };
                let weight = if has_weight {
                    let (last, rest) = cells
                        .split_last()
                        .ok_or_else(|| CliError::input(format!("row {} is empty", i + 1)))?;
                    cells = rest;
                    Some(number(last)?)
                } else {
                    None
                };
                let forecast = cells.iter().map(number).collect::<CliResult<Vec<f64>>>()?;
                Ok(ExpertEntry { id, forecast, weight })
            })
            .collect::<CliResult<Vec<_>>>()?;
        Ok(Self { n: None, labels, experts })
    }

    /// Checks the file invariants and returns the outcome count.
    pub fn validate(&self) -> CliResult<usize> {
        let first = self
            .experts
            .first()
            .ok_or_else(|| CliError::input("forecast file lists no experts"))?;
        let n = self.n.unwrap_or(first.forecast.len());
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(CliError::input(format!("{} labels for {n} outcomes", labels.len())));
            }
        }
        let with_weight = self.experts.iter().filter(|e| e.weight.is_some()).count();
        if with_weight != 0 && with_weight != self.experts.len() {
            return Err(CliError::input("either every expert has a weight or none does"));
        }
        for (i, e) in self.experts.iter().enumerate() {
            let name = e.id.clone().unwrap_or_else(|| format!("#{}", i + 1));
            if e.forecast.len() != n {
                return Err(CliError::input(format!(
                    "expert {name} has {} probabilities, expected {n}",
                    e.forecast.len()
                )));
            }
            Forecast::new(e.forecast.clone()).map_err(|err| CliError::input(format!("expert {name}: {err}")))?;
            if let Some(w) = e.weight {
                if !w.is_finite() || w < 0.0 {
                    return Err(CliError::input(format!("expert {name} has invalid weight {w}")));
                }
            }
        }
        Ok(n)
    }

    /// Weighted forecasts; missing weights are uniform.
    pub fn weighted(&self, weights: Option<&[f64]>) -> CliResult<Vec<WeightedForecast>> {
        let m = self.experts.len();
        let weights: Vec<f64> = match weights {
            Some(w) if w.len() != m => {
                return Err(CliError::input(format!("{} weights for {m} experts", w.len())));
            }
            Some(w) => {
                if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                    return Err(CliError::input("weights must be finite and nonnegative"));
                }
                w.to_vec()
            }
            None => self
                .experts
                .iter()
                .map(|e| e.weight.unwrap_or(1.0 / m as f64))
                .collect(),
        };
        self.experts
            .iter()
            .zip(weights)
            .map(|(e, w)| Ok(WeightedForecast::new(Forecast::new(e.forecast.clone())?, w)))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamStep {
    pub forecasts: Vec<Vec<f64>>,
    /// 1-based outcome index.
    pub outcome: usize,
}

/// A recorded online-learning stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamFile {
    pub steps: Vec<StreamStep>,
}

impl StreamFile {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("invalid stream file: {e}")))
    }

    pub fn from_steps(steps: &[Step]) -> Self {
        Self {
            steps: steps
                .iter()
                .map(|s| StreamStep {
                    forecasts: s.forecasts.iter().map(|p| p.probs().to_vec()).collect(),
                    outcome: s.outcome + 1,
                })
                .collect(),
        }
    }

    /// Validates the stream and converts outcomes to 0-based indices.
    pub fn into_steps(self) -> CliResult<Vec<Step>> {
        if self.steps.is_empty() {
            return Err(CliError::input("stream has no steps"));
        }
        let shape = |s: &StreamStep| (s.forecasts.len(), s.forecasts.first().map_or(0, Vec::len));
        let expected = shape(&self.steps[0]);
        self.steps
            .into_iter()
            .enumerate()
            .map(|(t, s)| {
                let at = |msg: String| CliError::input(format!("step {}: {msg}", t + 1));
                if shape(&s) != expected || s.forecasts.iter().any(|p| p.len() != expected.1) {
                    return Err(at("expert or outcome count differs from step 1".into()));
                }
                if s.outcome == 0 || s.outcome > expected.1 {
                    return Err(at(format!("outcome {} not in 1..={}", s.outcome, expected.1)));
                }
                let forecasts = s
                    .forecasts
                    .into_iter()
                    .map(Forecast::new)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| at(e.to_string()))?;
                Step::new(forecasts, s.outcome - 1).map_err(|e| at(e.to_string()))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// commands

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::input(format!("serialization failed: {e}")))
}

fn check_forecast(rule: &RuleSpec, probs: &Probs) -> CliResult<Forecast> {
    let p = Forecast::new(probs.0.clone())?;
    rule.check_domain(p.probs())?;
    Ok(p)
}

pub fn run(cli: Cli) -> CliResult<Output> {
    match cli.command {
        Command::Pool(args) => cmd_pool(&args),
        Command::Score(args) => cmd_score(&args),
        Command::Bregman(args) => cmd_bregman(&args),
        Command::Learn(args) => cmd_learn(&args),
        Command::Audit(args) => cmd_audit(&args),
        Command::ProbeExposure(args) => cmd_probe(&args),
    }
}

#[derive(Serialize)]
struct SurplusSummary {
    per_outcome_utility: Vec<f64>,
    surplus: f64,
    equalization_gap: f64,
    bregman_sum: f64,
}

#[derive(Serialize)]
struct PoolOutput {
    rule: RuleSpec,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    experts: usize,
    pooled: Forecast,
    total_weight: f64,
    residual: f64,
    method: PoolMethod,
    surplus: SurplusSummary,
}

pub fn cmd_pool(args: &PoolArgs) -> CliResult<Output> {
    let rule = args.rule;
    let file = ForecastFile::read(&args.input)?;
    let n = file.validate()?;
    let inputs = file.weighted(args.weights.as_deref())?;
    let result = if args.generalized {
        let options = GeneralizedOptions {
            floor: args.floor,
            ..GeneralizedOptions::default()
        };
        generalized_pool_with(&rule, &inputs, &options)
    } else {
        qa_pool(&rule, &inputs)
    };
    let result = result.map_err(|err| match err {
        QaError::ExposureRange(msg) => CliError {
            code: EXIT_EXPOSURE_RANGE,
            message: format!("exposure out of range: {msg}; rerun with --generalized"),
        },
        other => other.into(),
    })?;
    let report = surplus_report_at(&rule, &result.pooled, &inputs)?;
    let out = PoolOutput {
        rule,
        n,
        labels: file.labels.clone(),
        experts: inputs.len(),
        pooled: result.pooled,
        total_weight: result.total_weight,
        residual: result.residual,
        method: result.method,
        surplus: SurplusSummary {
            per_outcome_utility: report.per_outcome_utility,
            surplus: report.surplus,
            equalization_gap: report.equalization_gap,
            bregman_sum: report.bregman_sum,
        },
    };
    Ok(Output { json: to_json(&out)?, code: 0 })
}

#[derive(Serialize)]
struct ScoreOutput {
    rule: RuleSpec,
    forecast: Forecast,
    expected_reward: f64,
    exposure: Vec<f64>,
    scores: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outcome: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

pub fn cmd_score(args: &ScoreArgs) -> CliResult<Output> {
    let rule = args.rule;
    let p = check_forecast(&rule, &args.forecast)?;
    let scores = score_vector(&rule, &p)?;
    let score = match args.outcome {
        Some(j) if j == 0 || j > p.len() => {
            return Err(CliError::input(format!("outcome {j} not in 1..={}", p.len())));
        }
        Some(j) => Some(scores[j - 1]),
        None => None,
    };
    let out = ScoreOutput {
        rule,
        expected_reward: expected_reward(&rule, &p)?,
        exposure: exposure(&rule, &p)?.coords().to_vec(),
        forecast: p,
        scores,
        outcome: args.outcome,
        score,
    };
    Ok(Output { json: to_json(&out)?, code: 0 })
}

#[derive(Serialize)]
struct BregmanOutput {
    rule: RuleSpec,
    p: Forecast,
    q: Forecast,
    divergence: f64,
}

pub fn cmd_bregman(args: &BregmanArgs) -> CliResult<Output> {
    let rule = args.rule;
    let p = check_forecast(&rule, &args.p)?;
    let q = check_forecast(&rule, &args.q)?;
    if p.len() != q.len() {
        return Err(CliError::input("p and q have different outcome counts"));
    }
    let divergence = bregman(&rule, &p, &q)?;
    Ok(Output { json: to_json(&BregmanOutput { rule, p, q, divergence })?, code: 0 })
}

#[derive(Serialize)]
struct LearnOutput {
    source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    experts: usize,
    n: usize,
    horizon: usize,
    bound_valid: bool,
    #[serde(flatten)]
    report: RegretReport,
}

const DEFAULT_SYNTHETIC_HORIZON: usize = 1000;

pub fn cmd_learn(args: &LearnArgs) -> CliResult<Output> {
    let rule = args.rule;
    let (steps, source, seed) = match (&args.stream, args.synthetic) {
        (Some(path), _) => {
            let mut steps = StreamFile::read(path)?.into_steps()?;
            if let Some(h) = args.horizon {
                steps.truncate(h.max(1));
            }
            (steps, "file".to_owned(), None)
        }
        (None, Some(kind)) => {
            if args.experts == 0 || args.n < 2 {
                return Err(CliError::input("synthetic streams need --experts ≥ 1 and --n ≥ 2"));
            }
            let horizon = args.horizon.unwrap_or(DEFAULT_SYNTHETIC_HORIZON).max(1);
            let steps = match kind {
                Synthetic::Iid => iid_truthful_stream(args.n, args.experts, horizon, args.seed),
                Synthetic::Adversarial => {
                    let mut probe = LearningConfig::new(rule, args.experts);
                    probe.exposure_bound = args.exposure_bound;
                    let bound = probe.resolved_bound(args.n)?;
                    adversarial_stream(&rule, args.n, args.experts, horizon, bound, args.seed)?
                }
            };
            if let Some(path) = &args.save_stream {
                let text = to_json(&StreamFile::from_steps(&steps))?;
                fs::write(path, text + "\n")
                    .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
            }
            let name = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned));
            (steps, name.unwrap_or_default(), Some(args.seed))
        }
        (None, None) => return Err(CliError::input("give a stream file or --synthetic")),
    };
    let experts = steps[0].forecasts.len();
    let n = steps[0].forecasts[0].len();
    let mut config = LearningConfig::new(rule, experts);
    config.exposure_bound = args.exposure_bound;
    config.seed = args.seed;
    let report = ogd_run(&config, &steps)?;
    if let Some(path) = &args.emit_curve {
        let mut writer = csv::Writer::from_path(path)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        for row in report.curve() {
            writer
                .serialize(row)
                .map_err(|e| CliError::input(format!("cannot write curve: {e}")))?;
        }
        writer
            .flush()
            .map_err(|e| CliError::input(format!("cannot write curve: {e}")))?;
    }
    let out = LearnOutput {
        source,
        seed,
        experts,
        n,
        horizon: steps.len(),
        bound_valid: report.bound_is_valid(),
        report,
    };
    Ok(Output { json: to_json(&out)?, code: 0 })
}

#[derive(Serialize)]
struct Skipped {
    check: &'static str,
    reason: String,
}

#[derive(Serialize)]
struct AuditOutput {
    rule: RuleSpec,
    n: usize,
    samples: usize,
    seed: u64,
    convex_exposure: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    axioms: Option<AxiomReport>,
    exposure_probe: ExposureProbeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    concavity: Option<ConcavityReport>,
    skipped: Vec<Skipped>,
    passed: bool,
}

/// Experts per concavity triple in the audit.
const AUDIT_EXPERTS: usize = 3;

pub fn cmd_audit(args: &AuditArgs) -> CliResult<Output> {
    let rule = args.rule;
    if args.n < 2 {
        return Err(CliError::input("--n must be at least 2"));
    }
    let convex = has_convex_exposure(&rule, args.n);
    let mut skipped = Vec::new();
    let axioms = match axiom_suite(&rule, args.n, args.samples, args.seed) {
        Ok(report) => Some(report),
        Err(QaError::Config(reason)) => {
            skipped.push(Skipped { check: "axioms", reason });
            None
        }
        Err(e) => return Err(e.into()),
    };
    let probe = exposure_probe(&rule, args.n, args.samples, args.seed);
    let concavity = if convex {
        Some(concavity_probe(&rule, args.n, AUDIT_EXPERTS, args.samples, args.seed)?)
    } else {
        skipped.push(Skipped {
            check: "concavity",
            reason: format!("rule {rule} lacks convex exposure at n = {}", args.n),
        });
        None
    };
    let passed = axioms.as_ref().is_none_or(AxiomReport::all_passed)
        && probe.passed
        && concavity.as_ref().is_none_or(|c| c.passed);
    let out = AuditOutput {
        rule,
        n: args.n,
        samples: args.samples,
        seed: args.seed,
        convex_exposure: convex,
        axioms,
        exposure_probe: probe,
        concavity,
        skipped,
        passed,
    };
    Ok(Output {
        json: to_json(&out)?,
        code: if passed { 0 } else { EXIT_CHECK_FAILED },
    })
}

pub fn cmd_probe(args: &ProbeArgs) -> CliResult<Output> {
    if args.n < 2 {
        return Err(CliError::input("--n must be at least 2"));
    }
    let report = exposure_probe(&args.rule, args.n, args.samples, args.seed);
    let code = if report.passed { 0 } else { EXIT_CHECK_FAILED };
    Ok(Output { json: to_json(&report)?, code })
}
