//! Records, datasets, query specifications and result sets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of a scored dataset: a cheap proxy score and, when known, the
/// oracle's ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    id: u64,
    proxy: f64,
    label: Option<bool>,
}

impl Record {
    pub fn new(id: u64, proxy: f64, label: Option<bool>) -> Result<Self> {
        if !(0.0..=1.0).contains(&proxy) {
            return Err(Error::InvalidRecord(format!(
                "record {id}: proxy score {proxy} outside [0, 1]"
            )));
        }
        Ok(Self { id, proxy, label })
    }

    pub fn labeled(id: u64, proxy: f64, label: bool) -> Result<Self> {
        Self::new(id, proxy, Some(label))
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn proxy(&self) -> f64 {
        self.proxy
    }

    pub fn label(&self) -> Option<bool> {
        self.label
    }
}

/// An ordered, non-empty collection of records with unique ids.
///
/// Construction builds a score index (positions sorted by descending proxy,
/// ties broken by ascending id) so that `{x : A(x) >= tau}` is always a prefix
/// of [`Dataset::by_score_desc`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<Record>,
    by_score: Vec<usize>,
    positions: HashMap<u64, usize>,
}

impl Dataset {
    pub fn new(records: Vec<Record>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidDataset(
                "dataset must contain at least one record".into(),
            ));
        }
        let mut positions = HashMap::with_capacity(records.len());
        for (pos, record) in records.iter().enumerate() {
            if positions.insert(record.id, pos).is_some() {
                return Err(Error::InvalidDataset(format!(
                    "duplicate record id {}",
                    record.id
                )));
            }
        }
        let mut by_score: Vec<usize> = (0..records.len()).collect();
        by_score.sort_by(|&a, &b| {
            records[b]
                .proxy
                .total_cmp(&records[a].proxy)
                .then(records[a].id.cmp(&records[b].id))
        });
        Ok(Self {
            records,
            by_score,
            positions,
        })
    }

    /// Builds a fully labeled dataset with ids `0..n`.
    pub fn from_scores_and_labels(proxies: &[f64], labels: &[bool]) -> Result<Self> {
        if proxies.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} scores but {} labels",
                proxies.len(),
                labels.len()
            )));
        }
        let records = proxies
            .iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (&p, &l))| Record::labeled(i as u64, p, l))
            .collect::<Result<Vec<_>>>()?;
        Self::new(records)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, position: usize) -> &Record {
        &self.records[position]
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.positions.get(&id).copied()
    }

    /// Positions ordered by descending proxy score, ties by ascending id.
    pub fn by_score_desc(&self) -> &[usize] {
        &self.by_score
    }

    /// Positions of `D(tau) = {x : A(x) >= tau}`, highest score first.
    pub fn select(&self, tau: f64) -> &[usize] {
        let n = self
            .by_score
            .partition_point(|&pos| self.records[pos].proxy >= tau);
        &self.by_score[..n]
    }

    /// Ground-truth label of the record at `position`.
    pub fn truth(&self, position: usize) -> Result<bool> {
        let record = &self.records[position];
        record.label.ok_or(Error::MissingLabel { id: record.id })
    }

    /// Number of records whose oracle label is 1.
    pub fn positive_count(&self) -> Result<usize> {
        let mut count = 0;
        for pos in 0..self.records.len() {
            count += usize::from(self.truth(pos)?);
        }
        Ok(count)
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.records.iter().all(|r| r.label.is_some())
    }
}

/// What the returned set must achieve with probability `1 - delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Recall(f64),
    Precision(f64),
    Joint { recall: f64, precision: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QueryKind {
    #[serde(rename = "RT")]
    RecallTarget,
    #[serde(rename = "PT")]
    PrecisionTarget,
    #[serde(rename = "JT")]
    JointTarget,
}

impl Target {
    pub fn kind(&self) -> QueryKind {
        match self {
            Target::Recall(_) => QueryKind::RecallTarget,
            Target::Precision(_) => QueryKind::PrecisionTarget,
            Target::Joint { .. } => QueryKind::JointTarget,
        }
    }

    /// Whether achieved precision and recall satisfy this target.
    pub fn is_met(&self, precision: f64, recall: f64) -> bool {
        match *self {
            Target::Recall(g) => recall >= g,
            Target::Precision(g) => precision >= g,
            Target::Joint {
                recall: gr,
                precision: gp,
            } => recall >= gr && precision >= gp,
        }
    }
}

/// Sampling and threshold-selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    /// Uniform sample, empirical threshold, no confidence correction.
    #[serde(rename = "U-NoCI")]
    UniformNoCi,
    /// Uniform sample with confidence-bound correction.
    #[serde(rename = "U-CI")]
    UniformCi,
    /// Importance sample with confidence-bound correction.
    #[serde(rename = "IS-CI")]
    ImportanceCi,
}

impl EstimatorKind {
    pub fn label(&self) -> &'static str {
        match self {
            EstimatorKind::UniformNoCi => "U-NoCI",
            EstimatorKind::UniformCi => "U-CI",
            EstimatorKind::ImportanceCi => "IS-CI",
        }
    }
}

/// Minimum oracle budget; the normal-approximation bounds are asymptotic.
pub const MIN_BUDGET: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuerySpec {
    target: Target,
    budget: usize,
    delta: f64,
    estimator: EstimatorKind,
    seed: u64,
}

fn check_unit_open(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidQuery(format!(
            "{name} must lie in (0, 1), got {value}"
        )))
    }
}

impl QuerySpec {
    pub fn new(
        target: Target,
        budget: usize,
        delta: f64,
        estimator: EstimatorKind,
        seed: u64,
    ) -> Result<Self> {
        match target {
            Target::Recall(g) => check_unit_open("gamma", g)?,
            Target::Precision(g) => check_unit_open("gamma", g)?,
            Target::Joint { recall, precision } => {
                check_unit_open("gamma_r", recall)?;
                check_unit_open("gamma_p", precision)?;
            }
        }
        check_unit_open("delta", delta)?;
        if budget < MIN_BUDGET {
            return Err(Error::InvalidQuery(format!(
                "budget must be at least {MIN_BUDGET}, got {budget}"
            )));
        }
        Ok(Self {
            target,
            budget,
            delta,
            estimator,
            seed,
        })
    }

    pub fn recall(gamma: f64, budget: usize, delta: f64, estimator: EstimatorKind) -> Result<Self> {
        Self::new(Target::Recall(gamma), budget, delta, estimator, 0)
    }

    pub fn precision(
        gamma: f64,
        budget: usize,
        delta: f64,
        estimator: EstimatorKind,
    ) -> Result<Self> {
        Self::new(Target::Precision(gamma), budget, delta, estimator, 0)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn target(&self) -> Target {
        self.target
    }

    pub fn kind(&self) -> QueryKind {
        self.target.kind()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn estimator(&self) -> EstimatorKind {
        self.estimator
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub(crate) fn recall_target(&self) -> Result<f64> {
        match self.target {
            Target::Recall(g) => Ok(g),
            _ => Err(Error::InvalidQuery(
                "estimator requires a recall target".into(),
            )),
        }
    }

    pub(crate) fn precision_target(&self) -> Result<f64> {
        match self.target {
            Target::Precision(g) => Ok(g),
            _ => Err(Error::InvalidQuery(
                "estimator requires a precision target".into(),
            )),
        }
    }
}

/// Oracle accounting for joint-target queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct JointCalls {
    pub threshold_calls: usize,
    pub filter_calls: usize,
}

/// Records returned by a query, stored as sorted dataset positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub(crate) members: Vec<usize>,
    /// Proxy threshold; `f64::INFINITY` means only sampled positives are returned.
    pub tau: f64,
    /// Distinct oracle invocations.
    pub oracle_calls: usize,
    /// Raw sample draws, duplicates included.
    pub draws: usize,
    /// Number of records contributed by the threshold rule alone.
    pub threshold_selected: usize,
    pub joint: Option<JointCalls>,
}

impl ResultSet {
    pub fn from_positions(mut members: Vec<usize>, tau: f64, oracle_calls: usize) -> Self {
        members.sort_unstable();
        members.dedup();
        Self {
            members,
            tau,
            oracle_calls,
            draws: 0,
            threshold_selected: 0,
            joint: None,
        }
    }

    /// Builds a result from record ids; ids missing from the dataset are rejected.
    pub fn from_ids(
        dataset: &Dataset,
        ids: impl IntoIterator<Item = u64>,
        tau: f64,
        oracle_calls: usize,
    ) -> Result<Self> {
        let members = ids
            .into_iter()
            .map(|id| {
                dataset
                    .position_of(id)
                    .ok_or_else(|| Error::InvalidQuery(format!("unknown record id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_positions(members, tau, oracle_calls))
    }

    pub fn positions(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, position: usize) -> bool {
        self.members.binary_search(&position).is_ok()
    }

    /// Record ids in ascending position order.
    pub fn ids<'a>(&'a self, dataset: &'a Dataset) -> impl Iterator<Item = u64> + 'a {
        self.members.iter().map(move |&p| dataset.record(p).id())
    }
}
