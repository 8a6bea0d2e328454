//! Ground-truth and sample-level precision/recall.
//!
//! Selection is always inclusive: a record is selected by `tau` when its
//! proxy score is `>= tau`.

use crate::error::{Error, Result};
use crate::sampling::LabeledDraw;
use crate::types::{Dataset, ResultSet};

/// `|R ∩ O+| / |R|`; an empty result has precision 1.
pub fn true_precision(result: &ResultSet, dataset: &Dataset) -> Result<f64> {
    if result.is_empty() {
        return Ok(1.0);
    }
    let hits = count_hits(result, dataset)?;
    Ok(hits as f64 / result.len() as f64)
}

/// `|R ∩ O+| / |O+|`.
pub fn true_recall(result: &ResultSet, dataset: &Dataset) -> Result<f64> {
    let positives = dataset.positive_count()?;
    if positives == 0 {
        return Err(Error::NoPositives);
    }
    let hits = count_hits(result, dataset)?;
    Ok(hits as f64 / positives as f64)
}

fn count_hits(result: &ResultSet, dataset: &Dataset) -> Result<usize> {
    let mut hits = 0;
    for &pos in result.positions() {
        hits += usize::from(dataset.truth(pos)?);
    }
    Ok(hits)
}

fn unit_weights(sample: &[(f64, bool)]) -> impl Iterator<Item = (f64, bool, f64)> + '_ {
    sample.iter().map(|&(p, l)| (p, l, 1.0))
}

fn weighted(sample: &[LabeledDraw]) -> impl Iterator<Item = (f64, bool, f64)> + '_ {
    sample.iter().map(|d| (d.proxy, d.label, d.m))
}

fn recall_of(items: impl Iterator<Item = (f64, bool, f64)>, tau: f64) -> Result<f64> {
    let (mut hit, mut total) = (0.0, 0.0);
    for (proxy, label, m) in items {
        if label {
            total += m;
            if proxy >= tau {
                hit += m;
            }
        }
    }
    if total <= 0.0 {
        return Err(Error::NoPositiveSamples);
    }
    Ok(hit / total)
}

fn precision_of(items: impl Iterator<Item = (f64, bool, f64)>, tau: f64) -> Result<f64> {
    let (mut hit, mut selected, mut any) = (0.0, 0.0, false);
    for (proxy, label, m) in items {
        if proxy >= tau {
            any = true;
            selected += m;
            if label {
                hit += m;
            }
        }
    }
    if !any || selected <= 0.0 {
        return Err(Error::EmptySelection { tau });
    }
    Ok(hit / selected)
}

/// Fraction of sampled positives whose score is at or above `tau`.
pub fn empirical_recall(sample: &[(f64, bool)], tau: f64) -> Result<f64> {
    recall_of(unit_weights(sample), tau)
}

/// Mean label among sampled records with score at or above `tau`.
pub fn empirical_precision(sample: &[(f64, bool)], tau: f64) -> Result<f64> {
    precision_of(unit_weights(sample), tau)
}

/// `Σ 1{A>=tau} O m / Σ O m` over a reweighted sample.
pub fn weighted_empirical_recall(sample: &[LabeledDraw], tau: f64) -> Result<f64> {
    recall_of(weighted(sample), tau)
}

/// Self-normalized precision: `Σ_{A>=tau} O m / Σ_{A>=tau} m`.
pub fn weighted_empirical_precision(sample: &[LabeledDraw], tau: f64) -> Result<f64> {
    precision_of(weighted(sample), tau)
}
