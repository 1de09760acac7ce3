//! Reference discovery methods.
//!
//! The probability-difference baseline consumes the exact staircase
//! machinery of the engine (same batch, same event-probability
//! extraction) and differs only in the scoring rule, which isolates the
//! effect of the information-gain score in comparisons. The random and
//! frequency baselines need no model at all.

use crate::density::DensityBackend;
use crate::engine::{lagged_ig_matrix, CmiReport, TraceConfig};
use crate::error::{Error, Result};
use crate::graph::{Edge, InstanceGraph, PairMask};
use crate::scm::Sequence;
use crate::seed::{self, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Harness-level knobs for the three baselines.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BaselineConfig {
    /// Edge threshold for the probability-difference score, in
    /// probability units.
    pub granger_threshold: f64,
    /// Random-guesser edge probability.
    pub rho: f64,
    /// Number of most-frequent event types treated as universal causes.
    pub top_k: usize,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig { granger_threshold: 0.01, rho: 0.01, top_k: 5, seed: 0 }
    }
}

/// Same interventions as discovery, scored by the absolute difference of
/// the particle-averaged event probabilities instead of their KL.
pub fn granger_discover(
    backend: &dyn DensityBackend,
    seq: &Sequence,
    cfg: &TraceConfig,
    threshold: f64,
) -> Result<InstanceGraph> {
    if !(threshold >= 0.0) {
        return Err(Error::param("granger threshold must be non-negative"));
    }
    let report = lagged_ig_matrix(backend, seq, cfg)?;
    granger_graph_from_report(&report, threshold)
}

/// Re-thresholds an existing report by the probability-difference rule.
pub fn granger_graph_from_report(report: &CmiReport, threshold: f64) -> Result<InstanceGraph> {
    let edges: Vec<Edge> = report
        .scores
        .iter()
        .filter_map(|s| {
            let diff = (s.p_do - s.p_base).abs();
            (diff > threshold).then_some(Edge { src: s.src, dst: s.dst, weight: diff })
        })
        .collect();
    InstanceGraph::new(report.seq_len, edges, report.testable_mask())
}

/// Predicts each testable pair independently with probability `rho`.
pub fn random_discover(seq: &Sequence, rho: f64, context: usize, rng_seed: u64) -> Result<InstanceGraph> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho must lie in [0, 1]"));
    }
    if context >= seq.len() {
        return Err(Error::param("context must be smaller than the sequence length"));
    }
    let mask = PairMask::banded(context, seq.len(), None);
    let mut rng = seed::rng(rng_seed, tag::RANDOM_BASELINE, &[]);
    let edges = mask
        .iter()
        .filter(|_| rng.gen::<f64>() < rho)
        .map(|(j, i)| Edge { src: j, dst: i, weight: 1.0 })
        .collect();
    InstanceGraph::new(seq.len(), edges, mask)
}

/// Declares the `top_k` most frequent event types of the sequence to be
/// universal causes: every testable pair whose source realizes one of
/// them becomes an edge. Frequency ties break toward the smaller token.
pub fn frequency_discover(seq: &Sequence, top_k: usize, context: usize) -> Result<InstanceGraph> {
    if top_k < 1 {
        return Err(Error::param("top_k must be at least 1"));
    }
    if context >= seq.len() {
        return Err(Error::param("context must be smaller than the sequence length"));
    }
    let mut counts: Vec<(u32, usize)> = Vec::new();
    for &t in &seq.tokens {
        match counts.iter_mut().find(|(tok, _)| *tok == t) {
            Some((_, c)) => *c += 1,
            None => counts.push((t, 1)),
        }
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let causes: Vec<u32> = counts.iter().take(top_k).map(|&(t, _)| t).collect();

    let mask = PairMask::banded(context, seq.len(), None);
    let edges = mask
        .iter()
        .filter(|&(j, _)| causes.contains(&seq.tokens[j as usize]))
        .map(|(j, i)| Edge { src: j, dst: i, weight: 1.0 })
        .collect();
    InstanceGraph::new(seq.len(), edges, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::exact_backend;
    use crate::scm::{ScmGenConfig, ScmParams};

    fn independence_scm() -> ScmParams {
        ScmParams::generate(&ScmGenConfig {
            vocab_size: 6,
            memory: 2,
            sparsity: 0.5,
            decay_rate: 0.8,
            weight_scale: 0.0,
            bias_scale: 0.4,
            seed: 3,
        })
        .unwrap()
    }

    #[test]
    fn granger_shares_the_intervention_batch_with_discovery() {
        let scm = ScmParams::generate(&ScmGenConfig {
            vocab_size: 8,
            memory: 2,
            sparsity: 0.2,
            decay_rate: 0.9,
            weight_scale: 2.0,
            bias_scale: 0.3,
            seed: 5,
        })
        .unwrap();
        let backend = exact_backend(scm.clone());
        let seq = scm.sample_sequence(16, 2).unwrap();
        let cfg = TraceConfig::new(32, 1e-4, 4, 9);
        let trace_report = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
        let granger_report = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
        assert_eq!(trace_report.batch_hash, granger_report.batch_hash);
        let g = granger_graph_from_report(&granger_report, 0.01).unwrap();
        assert_eq!(g.mask, trace_report.testable_mask());
    }

    #[test]
    fn granger_independence_is_empty_at_any_positive_threshold() {
        let scm = independence_scm();
        let backend = exact_backend(scm.clone());
        let seq = scm.sample_sequence(14, 1).unwrap();
        let g = granger_discover(&backend, &seq, &TraceConfig::new(16, 0.0, 4, 2), 1e-12)
            .unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn granger_threshold_one_is_empty() {
        let scm = ScmParams::generate(&ScmGenConfig {
            vocab_size: 6,
            memory: 1,
            sparsity: 0.5,
            decay_rate: 1.0,
            weight_scale: 4.0,
            bias_scale: 0.2,
            seed: 7,
        })
        .unwrap();
        let backend = exact_backend(scm.clone());
        let seq = scm.sample_sequence(12, 3).unwrap();
        let g = granger_discover(&backend, &seq, &TraceConfig::new(16, 0.0, 3, 2), 1.0).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn random_extremes() {
        let seq = Sequence::new((0..20).map(|i| i % 4).collect(), 4, 0).unwrap();
        let empty = random_discover(&seq, 0.0, 5, 1).unwrap();
        assert!(empty.edges.is_empty());
        let all = random_discover(&seq, 1.0, 5, 1).unwrap();
        assert_eq!(all.edges.len(), all.mask.len());
        assert!(random_discover(&seq, 1.5, 5, 1).is_err());
    }

    #[test]
    fn random_edge_count_matches_binomial_expectation() {
        let seq = Sequence::new((0..30).map(|i| i % 4).collect(), 4, 0).unwrap();
        let mask_len = PairMask::banded(5, 30, None).len() as f64;
        let rho = 0.1;
        let mut total = 0usize;
        for s in 0..100 {
            total += random_discover(&seq, rho, 5, s).unwrap().edges.len();
        }
        let mean = total as f64 / 100.0;
        let expect = rho * mask_len;
        let sigma = (mask_len * rho * (1.0 - rho) / 100.0).sqrt();
        assert!((mean - expect).abs() < 3.0 * sigma, "mean {mean} expect {expect}");
    }

    #[test]
    fn frequency_universal_causes() {
        let seq = Sequence::new(vec![2; 12], 4, 0).unwrap();
        let g = frequency_discover(&seq, 1, 3).unwrap();
        assert_eq!(g.edges.len(), g.mask.len());

        let seq = Sequence::new(vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1], 4, 0).unwrap();
        let g = frequency_discover(&seq, 4, 2).unwrap();
        assert_eq!(g.edges.len(), g.mask.len());

        // k=1 with a tie between 0 and 1 (3 occurrences each after
        // position counts) picks the smaller token id.
        let seq = Sequence::new(vec![1, 0, 1, 0, 1, 0, 2, 3, 2, 3], 4, 0).unwrap();
        let g = frequency_discover(&seq, 1, 2).unwrap();
        for e in &g.edges {
            assert_eq!(seq.tokens[e.src as usize], 0);
        }
    }

    #[test]
    fn baselines_respect_temporal_precedence() {
        let seq = Sequence::new((0..16).map(|i| i % 5).collect(), 5, 0).unwrap();
        for g in [
            random_discover(&seq, 0.5, 4, 3).unwrap(),
            frequency_discover(&seq, 2, 4).unwrap(),
        ] {
            for e in &g.edges {
                assert!(e.src < e.dst && e.src >= 4);
                assert!(g.mask.contains(e.src, e.dst));
            }
        }
    }
}
