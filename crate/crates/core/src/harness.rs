//! Repeated-trial experiments: failure rates, quality distributions,
//! parameter sweeps and train/test drift comparisons.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confidence::{quantile, BoundMethod};
use crate::error::{Error, Result};
use crate::estimators::{noci_precision_threshold, recall_threshold, EstimatorConfig};
use crate::metrics::{true_precision, true_recall};
use crate::query::run_query;
use crate::sampling::{BudgetedOracle, LabeledDraw};
use crate::seed;
use crate::synth::{gen_beta, BetaSpec};
use crate::types::{Dataset, QuerySpec, Record, ResultSet, Target};

#[derive(Debug, Clone)]
pub enum DataSource {
    Beta(BetaSpec),
    Loaded(Arc<Dataset>),
}

impl DataSource {
    pub fn materialize(&self) -> Result<Arc<Dataset>> {
        match self {
            DataSource::Beta(spec) => Ok(Arc::new(gen_beta(spec)?)),
            DataSource::Loaded(d) => Ok(Arc::clone(d)),
        }
    }
}

/// One estimator configuration under test. The name seeds its trials.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub name: String,
    pub spec: QuerySpec,
    pub config: EstimatorConfig,
}

impl Arm {
    pub fn new(name: impl Into<String>, spec: QuerySpec, config: EstimatorConfig) -> Self {
        Self {
            name: name.into(),
            spec,
            config,
        }
    }
}

/// One axis of a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "param", content = "values")]
pub enum SweepAxis {
    Gamma(Vec<f64>),
    Budget(Vec<usize>),
    NoiseSd(Vec<f64>),
    Beta(Vec<f64>),
    MixRatio(Vec<f64>),
    Step(Vec<usize>),
    WeightExponent(Vec<f64>),
    BoundMethod(Vec<BoundMethod>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SweepValue {
    Gamma(f64),
    Budget(usize),
    NoiseSd(f64),
    Beta(f64),
    MixRatio(f64),
    Step(usize),
    WeightExponent(f64),
    BoundMethod(BoundMethod),
}

impl SweepAxis {
    fn values(&self) -> Vec<SweepValue> {
        match self {
            SweepAxis::Gamma(v) => v.iter().map(|&x| SweepValue::Gamma(x)).collect(),
            SweepAxis::Budget(v) => v.iter().map(|&x| SweepValue::Budget(x)).collect(),
            SweepAxis::NoiseSd(v) => v.iter().map(|&x| SweepValue::NoiseSd(x)).collect(),
            SweepAxis::Beta(v) => v.iter().map(|&x| SweepValue::Beta(x)).collect(),
            SweepAxis::MixRatio(v) => v.iter().map(|&x| SweepValue::MixRatio(x)).collect(),
            SweepAxis::Step(v) => v.iter().map(|&x| SweepValue::Step(x)).collect(),
            SweepAxis::WeightExponent(v) => {
                v.iter().map(|&x| SweepValue::WeightExponent(x)).collect()
            }
            SweepAxis::BoundMethod(v) => v.iter().map(|&x| SweepValue::BoundMethod(x)).collect(),
        }
    }
}

impl SweepValue {
    fn label(&self) -> String {
        match self {
            SweepValue::Gamma(x) => format!("gamma={x}"),
            SweepValue::Budget(x) => format!("budget={x}"),
            SweepValue::NoiseSd(x) => format!("noise_sd={x}"),
            SweepValue::Beta(x) => format!("beta={x}"),
            SweepValue::MixRatio(x) => format!("mix_ratio={x}"),
            SweepValue::Step(x) => format!("step={x}"),
            SweepValue::WeightExponent(x) => format!("weight_exponent={x}"),
            SweepValue::BoundMethod(m) => format!("bound_method={}", m.name()),
        }
    }

    fn touches_data(&self) -> bool {
        matches!(self, SweepValue::NoiseSd(_) | SweepValue::Beta(_))
    }
}

fn retarget(target: Target, gamma: f64) -> Target {
    match target {
        Target::Recall(_) => Target::Recall(gamma),
        Target::Precision(_) => Target::Precision(gamma),
        Target::Joint { .. } => Target::Joint {
            recall: gamma,
            precision: gamma,
        },
    }
}

fn apply_to_arm(arm: &mut Arm, value: SweepValue) -> Result<()> {
    let s = arm.spec;
    match value {
        SweepValue::Gamma(g) => {
            arm.spec = QuerySpec::new(
                retarget(s.target(), g),
                s.budget(),
                s.delta(),
                s.estimator(),
                s.seed(),
            )?;
        }
        SweepValue::Budget(b) => {
            arm.spec = QuerySpec::new(s.target(), b, s.delta(), s.estimator(), s.seed())?;
        }
        SweepValue::MixRatio(r) => arm.config.mix_ratio = r,
        SweepValue::Step(m) => arm.config.step = m,
        SweepValue::WeightExponent(e) => arm.config.weight_exponent = e,
        SweepValue::BoundMethod(b) => arm.config.bound_method = b,
        SweepValue::NoiseSd(_) | SweepValue::Beta(_) => {}
    }
    arm.config.validate()
}

fn apply_to_source(source: &DataSource, value: SweepValue) -> Result<DataSource> {
    match (source, value) {
        (DataSource::Beta(spec), SweepValue::NoiseSd(sd)) => {
            Ok(DataSource::Beta(spec.with_noise(sd)))
        }
        (DataSource::Beta(spec), SweepValue::Beta(b)) => {
            Ok(DataSource::Beta(BetaSpec { beta: b, ..*spec }))
        }
        (DataSource::Loaded(_), v) => Err(Error::InvalidExperiment(format!(
            "{} needs a synthetic data source",
            v.label()
        ))),
        (s, _) => Ok(s.clone()),
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub arms: Vec<Arm>,
    pub trials: usize,
    pub base_seed: u64,
    /// Cartesian grid; each point runs every arm.
    pub sweep: Vec<SweepAxis>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidExperiment("trials must be at least 1".into()));
        }
        if self.arms.is_empty() {
            return Err(Error::InvalidExperiment(
                "at least one arm is required".into(),
            ));
        }
        let mut names: Vec<&str> = self.arms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidExperiment("arm names must be unique".into()));
        }
        if self.sweep.iter().any(|a| a.values().is_empty()) {
            return Err(Error::InvalidExperiment(
                "sweep axes need at least one value".into(),
            ));
        }
        for arm in &self.arms {
            arm.config.validate()?;
        }
        Ok(())
    }
}

/// One grid point of a sweep: its data source and the arms rewritten for it.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub source: DataSource,
    pub arms: Vec<Arm>,
}

/// Expands the sweep grid. Without a sweep there is a single point with an
/// empty label and the arms unchanged. Swept arms are renamed
/// `name[param=value,...]`.
pub fn expand_sweep(config: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let mut grid: Vec<Vec<SweepValue>> = vec![Vec::new()];
    for axis in &config.sweep {
        grid = grid
            .into_iter()
            .flat_map(|prefix| {
                axis.values().into_iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    grid.into_iter()
        .map(|values| {
            let label = values
                .iter()
                .map(SweepValue::label)
                .collect::<Vec<_>>()
                .join(",");
            let mut source = config.source.clone();
            for v in values.iter().filter(|v| v.touches_data()) {
                source = apply_to_source(&source, *v)?;
            }
            let arms = config
                .arms
                .iter()
                .map(|arm| {
                    let mut a = arm.clone();
                    for v in &values {
                        apply_to_arm(&mut a, *v)?;
                    }
                    if !label.is_empty() {
                        a.name = format!("{}[{label}]", arm.name);
                    }
                    Ok(a)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SweepPoint {
                label,
                source,
                arms,
            })
        })
        .collect()
}

/// Outcome of one query execution, scored against full ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub arm: String,
    pub trial: usize,
    pub seed: u64,
    pub achieved_precision: f64,
    pub achieved_recall: f64,
    pub valid: bool,
    pub oracle_calls: usize,
    pub draws: usize,
    pub tau: f64,
    pub result_size: usize,
    /// Labels spent filtering the thresholded set (joint targets only).
    pub filter_calls: Option<usize>,
    /// Set when the estimator failed; such trials count as invalid.
    pub error: Option<String>,
}

fn score(dataset: &Dataset, target: Target, result: &ResultSet) -> Result<(f64, f64, bool)> {
    let precision = true_precision(result, dataset)?;
    let recall = true_recall(result, dataset)?;
    Ok((precision, recall, target.is_met(precision, recall)))
}

/// Runs one seeded trial of `arm`.
pub fn run_trial(dataset: &Dataset, arm: &Arm, trial: usize, base_seed: u64) -> TrialReport {
    let trial_seed = seed::derive(base_seed, &arm.name, trial as u64);
    let spec = arm.spec.with_seed(trial_seed);
    let mut oracle = BudgetedOracle::new(dataset, spec.budget());
    let outcome = run_query(dataset, &spec, &arm.config, &mut oracle)
        .and_then(|r| score(dataset, spec.target(), &r).map(|s| (r, s)));
    match outcome {
        Ok((r, (precision, recall, valid))) => TrialReport {
            arm: arm.name.clone(),
            trial,
            seed: trial_seed,
            achieved_precision: precision,
            achieved_recall: recall,
            valid,
            oracle_calls: r.oracle_calls,
            draws: r.draws,
            tau: r.tau,
            result_size: r.len(),
            filter_calls: r.joint.map(|j| j.filter_calls),
            error: None,
        },
        Err(e) => TrialReport {
            arm: arm.name.clone(),
            trial,
            seed: trial_seed,
            achieved_precision: 0.0,
            achieved_recall: 0.0,
            valid: false,
            oracle_calls: oracle.used(),
            draws: 0,
            tau: f64::NAN,
            result_size: 0,
            filter_calls: None,
            error: Some(e.to_string()),
        },
    }
}

fn check_ground_truth(dataset: &Dataset) -> Result<()> {
    if dataset.is_fully_labeled() {
        Ok(())
    } else {
        Err(Error::InvalidExperiment(
            "experiments need an oracle label on every record".into(),
        ))
    }
}

/// Runs every trial of every arm against one dataset, in parallel.
/// Output order is arm order, then trial order.
pub fn run_arms(
    dataset: &Dataset,
    arms: &[Arm],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<TrialReport>> {
    check_ground_truth(dataset)?;
    let jobs: Vec<(&Arm, usize)> = arms
        .iter()
        .flat_map(|a| (0..trials).map(move |t| (a, t)))
        .collect();
    Ok(jobs
        .into_par_iter()
        .map(|(arm, t)| run_trial(dataset, arm, t, base_seed))
        .collect())
}

/// Runs all sweep points and arms. Results do not depend on thread count.
pub fn run_trials(config: &ExperimentConfig) -> Result<Vec<TrialReport>> {
    config.validate()?;
    let mut reports = Vec::new();
    let mut cached: Option<(String, Arc<Dataset>)> = None;
    for point in expand_sweep(config)? {
        let key = match &point.source {
            DataSource::Beta(s) => format!("{s:?}"),
            DataSource::Loaded(_) => String::new(),
        };
        let dataset = match &cached {
            Some((k, d)) if *k == key => Arc::clone(d),
            _ => {
                let d = point.source.materialize()?;
                cached = Some((key, Arc::clone(&d)));
                d
            }
        };
        reports.extend(run_arms(
            &dataset,
            &point.arms,
            config.trials,
            config.base_seed,
        )?);
    }
    Ok(reports)
}

/// Fraction of invalid trials.
pub fn failure_rate(reports: &[TrialReport]) -> Result<f64> {
    if reports.is_empty() {
        return Err(Error::EmptyReports);
    }
    Ok(reports.iter().filter(|r| !r.valid).count() as f64 / reports.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualitySummary {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    /// Standard error of the mean (0 for a single value).
    pub std_error: f64,
}

impl QualitySummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyReports);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let std_error = if sorted.len() > 1 {
            let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Ok(Self {
            mean,
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            std_error,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Precision,
    Recall,
}

/// Distribution of one achieved metric over the trials that completed.
pub fn quality_summary(reports: &[TrialReport], metric: Metric) -> Result<QualitySummary> {
    let values: Vec<f64> = reports
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| match metric {
            Metric::Precision => r.achieved_precision,
            Metric::Recall => r.achieved_recall,
        })
        .collect();
    QualitySummary::of(&values)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub arm: String,
    pub trials: usize,
    pub failures: usize,
    pub errors: usize,
    pub failure_rate: f64,
    pub precision: Option<QualitySummary>,
    pub recall: Option<QualitySummary>,
    pub mean_oracle_calls: f64,
    pub mean_filter_calls: Option<f64>,
}

/// Per-arm summaries in first-appearance order.
pub fn summarize(reports: &[TrialReport]) -> Result<Vec<ArmSummary>> {
    if reports.is_empty() {
        return Err(Error::EmptyReports);
    }
    let mut order: Vec<&str> = Vec::new();
    for r in reports {
        if !order.contains(&r.arm.as_str()) {
            order.push(&r.arm);
        }
    }
    order
        .into_iter()
        .map(|name| {
            let rs: Vec<TrialReport> = reports.iter().filter(|r| r.arm == name).cloned().collect();
            let filter: Vec<f64> = rs
                .iter()
                .filter_map(|r| r.filter_calls)
                .map(|c| c as f64)
                .collect();
            Ok(ArmSummary {
                arm: name.to_string(),
                trials: rs.len(),
                failures: rs.iter().filter(|r| !r.valid).count(),
                errors: rs.iter().filter(|r| r.error.is_some()).count(),
                failure_rate: failure_rate(&rs)?,
                precision: quality_summary(&rs, Metric::Precision).ok(),
                recall: quality_summary(&rs, Metric::Recall).ok(),
                mean_oracle_calls: rs.iter().map(|r| r.oracle_calls as f64).sum::<f64>()
                    / rs.len() as f64,
                mean_filter_calls: (!filter.is_empty())
                    .then(|| filter.iter().sum::<f64>() / filter.len() as f64),
            })
        })
        .collect()
}

/// Threshold fitted with every training label and no confidence correction.
pub fn naive_threshold(train: &Dataset, target: Target) -> Result<f64> {
    check_ground_truth(train)?;
    let all: Vec<LabeledDraw> = train
        .records()
        .iter()
        .enumerate()
        .map(|(position, r)| LabeledDraw {
            position,
            proxy: r.proxy(),
            label: r.label().unwrap_or(false),
            m: 1.0,
        })
        .collect();
    match target {
        Target::Recall(g) => recall_threshold(&all, g).ok_or(Error::NoPositives),
        Target::Precision(g) => Ok(noci_precision_threshold(&all, g).unwrap_or(f64::INFINITY)),
        Target::Joint { .. } => Err(Error::InvalidExperiment(
            "drift comparison supports recall and precision targets".into(),
        )),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRow {
    pub arm: String,
    pub target: f64,
    pub naive_tau: f64,
    pub naive_precision: f64,
    pub naive_recall: f64,
    pub naive_valid: bool,
    pub budgeted: ArmSummary,
}

/// Naive thresholds fitted on `train` and applied to `test`, next to each
/// arm run on `test` under its budget.
pub fn run_drift(
    train: &Dataset,
    test: &Dataset,
    arms: &[Arm],
    trials: usize,
    base_seed: u64,
) -> Result<(Vec<DriftRow>, Vec<TrialReport>)> {
    check_ground_truth(test)?;
    let reports = run_arms(test, arms, trials, base_seed)?;
    let summaries = summarize(&reports)?;
    let rows = arms
        .iter()
        .zip(summaries)
        .map(|(arm, budgeted)| {
            let target = arm.spec.target();
            let tau = naive_threshold(train, target)?;
            let result = ResultSet::from_positions(test.select(tau).to_vec(), tau, 0);
            let (precision, recall, valid) = score(test, target, &result)?;
            let gamma = match target {
                Target::Recall(g) | Target::Precision(g) => g,
                Target::Joint { recall, .. } => recall,
            };
            Ok(DriftRow {
                arm: arm.name.clone(),
                target: gamma,
                naive_tau: tau,
                naive_precision: precision,
                naive_recall: recall,
                naive_valid: valid,
                budgeted,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((rows, reports))
}

/// Subsamples records without replacement so that the positive fraction
/// equals `rate`, dropping only the over-represented class. Ids are kept.
pub fn resample_positive_rate(dataset: &Dataset, rate: f64, seed: u64) -> Result<Dataset> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(Error::InvalidDataset(format!(
            "positive rate must lie in (0, 1), got {rate}"
        )));
    }
    check_ground_truth(dataset)?;
    let (mut pos, mut neg): (Vec<Record>, Vec<Record>) = dataset
        .records()
        .iter()
        .partition(|r| r.label() == Some(true));
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::InvalidDataset(
            "resampling needs both classes present".into(),
        ));
    }
    let mut rng = seed::rng_from_seed(seed);
    let keep_pos = ((rate / (1.0 - rate)) * neg.len() as f64).round() as usize;
    if keep_pos <= pos.len() {
        pos.shuffle(&mut rng);
        pos.truncate(keep_pos.max(1));
    } else {
        let keep_neg = (((1.0 - rate) / rate) * pos.len() as f64).round() as usize;
        neg.shuffle(&mut rng);
        neg.truncate(keep_neg.max(1));
    }
    let mut kept: Vec<Record> = pos.into_iter().chain(neg).collect();
    kept.sort_by_key(Record::id);
    Dataset::new(kept)
}
