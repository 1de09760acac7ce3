//! Graph comparison against ground truth.
//!
//! Temporal orientation is fixed, so there are no orientation errors:
//! the structural Hamming distance is exactly the count of extra plus
//! missing directed edges over the common testable support.

use crate::error::{Error, Result};
use crate::graph::InstanceGraph;
use crate::info;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphScore {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_count: usize,
    /// fp + fn.
    pub shd: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Size of the common testable support the counts were taken over.
    pub testable_pairs: usize,
}

/// Compares predicted and truth edge sets over the intersection of their
/// testable masks. Edge weights are ignored; presence is what counts.
pub fn compare_graphs(predicted: &InstanceGraph, truth: &InstanceGraph) -> Result<GraphScore> {
    if predicted.n_nodes != truth.n_nodes {
        return Err(Error::mismatch("graphs have different node counts"));
    }
    let support = predicted.mask.intersect(&truth.mask);
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_count = 0;
    for (j, i) in support.iter() {
        match (predicted.has_edge(j, i), truth.has_edge(j, i)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_count += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_count == 0 { 1.0 } else { tp as f64 / (tp + fn_count) as f64 };
    let f1 = if fp + fn_count == 0 {
        1.0
    } else if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(GraphScore {
        tp,
        fp,
        fn_count,
        shd: fp + fn_count,
        precision,
        recall,
        f1,
        testable_pairs: support.len(),
    })
}

/// Mean and sample standard deviation of each metric.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MetricSummary {
    pub n: usize,
    pub shd_mean: f64,
    pub shd_std: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
}

pub fn aggregate(scores: &[GraphScore]) -> Result<MetricSummary> {
    if scores.is_empty() {
        return Err(Error::param("cannot aggregate an empty score list"));
    }
    let col = |f: fn(&GraphScore) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = scores.iter().map(f).collect();
        info::mean_std(&vals)
    };
    let (shd_mean, shd_std) = col(|s| s.shd as f64);
    let (precision_mean, precision_std) = col(|s| s.precision);
    let (recall_mean, recall_std) = col(|s| s.recall);
    let (f1_mean, f1_std) = col(|s| s.f1);
    Ok(MetricSummary {
        n: scores.len(),
        shd_mean,
        shd_std,
        precision_mean,
        precision_std,
        recall_mean,
        recall_std,
        f1_mean,
        f1_std,
    })
}

/// Per-sequence scores plus their aggregate, tagged with the
/// configuration that produced them.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config_fingerprint: String,
    pub scores: Vec<GraphScore>,
    pub summary: MetricSummary,
}

impl RunSummary {
    pub fn new(config_fingerprint: String, scores: Vec<GraphScore>) -> Result<Self> {
        let summary = aggregate(&scores)?;
        Ok(RunSummary { config_fingerprint, scores, summary })
    }
}

/// Table-style "0.91 ± 0.01" rendering.
pub fn format_mean_std(mean: f64, std: f64, decimals: usize) -> String {
    format!("{mean:.decimals$} \u{b1} {std:.decimals$}")
}
