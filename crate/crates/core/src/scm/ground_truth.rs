//! Interventional ground truth for generated sequences.
//!
//! For every ordered pair `(j, i)` in the testable band, the cause token
//! `x_j` is uniformly randomized: the interventional distribution of
//! `X_i` is the average of the kernel's predictions over counterfactual
//! draws of `x_j`, while the mediator positions between `j` and `i` are
//! re-randomized with draws shared across every arm (common random
//! numbers). The KL divergence between that interventional mixture and
//! the observational distribution decides edge membership.

use super::{ScmParams, Sequence};
use crate::error::{Error, Result};
use crate::graph::{Edge, InstanceGraph, PairMask};
use crate::info;
use crate::seed::{self, tag};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GroundTruthConfig {
    /// Uniform counterfactual draws per tested cause.
    pub n_counterfactuals: usize,
    /// Minimum average KL (nats) for an edge.
    pub edge_threshold: f64,
    /// Monte-Carlo mediator draws when the gap is too wide to enumerate.
    pub rollout_particles: usize,
    /// Compare the Bernoulli distributions of the observed-token event
    /// (the default) instead of the full next-token distributions.
    pub binary_event: bool,
    pub seed: u64,
}

impl Default for GroundTruthConfig {
    fn default() -> Self {
        GroundTruthConfig {
            n_counterfactuals: 10,
            edge_threshold: 0.05,
            rollout_particles: 64,
            binary_event: true,
            seed: 0,
        }
    }
}

/// Gaps up to this size are marginalized by exact enumeration instead of
/// Monte-Carlo rollouts.
const EXACT_GAP: usize = 2;

/// Scores every pair `context <= j < i < L` against the true kernel and
/// keeps those whose average interventional KL exceeds the threshold.
/// Pure in `(scm, seq, cfg, context)`; the pair loop is data-parallel
/// with per-pair seeds, so any schedule yields the same graph.
pub fn ground_truth_instance_graph(
    scm: &ScmParams,
    seq: &Sequence,
    cfg: &GroundTruthConfig,
    context: usize,
) -> Result<InstanceGraph> {
    if cfg.n_counterfactuals < 1 {
        return Err(Error::param("n_counterfactuals must be at least 1"));
    }
    if !(cfg.edge_threshold > 0.0) {
        return Err(Error::param("edge_threshold must be positive"));
    }
    if cfg.rollout_particles < 1 {
        return Err(Error::param("rollout_particles must be at least 1"));
    }
    let len = seq.len();
    if context >= len {
        return Err(Error::param("context must be smaller than the sequence length"));
    }
    if seq.vocab_size as usize != scm.vocab_size() {
        return Err(Error::mismatch("sequence vocabulary does not match the SCM"));
    }
    if let Some(origin) = seq.origin {
        if origin != scm.fingerprint() {
            return Err(Error::mismatch("sequence was not generated by this SCM"));
        }
    }
    if seq.tokens.iter().any(|&t| t as usize >= scm.vocab_size()) {
        return Err(Error::input("token out of vocabulary range"));
    }

    let mask = PairMask::banded(context, len, None);
    let scored: Vec<Edge> = mask
        .iter()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(j, i)| Edge {
            src: j,
            dst: i,
            weight: pair_score(scm, seq, cfg, j as usize, i as usize),
        })
        .collect();

    let edges = scored.into_iter().filter(|e| e.weight > cfg.edge_threshold).collect();
    InstanceGraph::new(len, edges, mask)
}

/// Average interventional KL for one candidate pair.
fn pair_score(scm: &ScmParams, seq: &Sequence, cfg: &GroundTruthConfig, j: usize, i: usize) -> f64 {
    let gap = i - j;
    // The kernel at i only sees the last `memory` positions; a cause
    // beyond that window cannot move the target once the mediators are
    // re-randomized, so the divergence is exactly zero.
    if gap > scm.memory() {
        return 0.0;
    }

    let v = scm.vocab_size();
    let n_mediators = gap - 1;
    let window_len = scm.memory().min(i);
    let window_start = i - window_len;
    let mut window: Vec<u32> = seq.tokens[window_start..i].to_vec();
    let cause_slot = j - window_start;

    // Counterfactual arm values for x_j.
    let mut cf_rng = seed::rng(cfg.seed, tag::TRUTH_COUNTERFACTUAL, &[j as u64, i as u64]);
    let arms: Vec<u32> = std::iter::once(seq.tokens[j])
        .chain((0..cfg.n_counterfactuals).map(|_| cf_rng.gen_range(0..v as u32)))
        .collect();

    // Mediator assignments, shared across every arm.
    let assignments: Vec<Vec<u32>> = if n_mediators == 0 {
        vec![Vec::new()]
    } else if gap <= EXACT_GAP {
        (0..v as u32).map(|m| vec![m]).collect()
    } else {
        let mut med_rng = seed::rng(cfg.seed, tag::TRUTH_MEDIATOR, &[j as u64, i as u64]);
        (0..cfg.rollout_particles)
            .map(|_| (0..n_mediators).map(|_| med_rng.gen_range(0..v as u32)).collect())
            .collect()
    };

    let mut arm_sums = vec![vec![0.0; v]; arms.len()];
    let mut dist = vec![0.0; v];
    for assignment in &assignments {
        for (pos, &m) in assignment.iter().enumerate() {
            window[cause_slot + 1 + pos] = m;
        }
        for (a, &value) in arms.iter().enumerate() {
            window[cause_slot] = value;
            scm.transition_into(&window, &mut dist).expect("window tokens are in range");
            for (s, &p) in arm_sums[a].iter_mut().zip(&dist) {
                *s += p;
            }
        }
    }
    let norm = assignments.len() as f64;
    for sums in &mut arm_sums {
        for s in sums.iter_mut() {
            *s /= norm;
        }
    }

    let observed = &arm_sums[0];
    let mut do_mixture = vec![0.0; v];
    for do_dist in &arm_sums[1..] {
        for (m, &p) in do_mixture.iter_mut().zip(do_dist) {
            *m += p;
        }
    }
    for m in do_mixture.iter_mut() {
        *m /= cfg.n_counterfactuals as f64;
    }
    if cfg.binary_event {
        info::binary_kl(do_mixture[seq.tokens[i] as usize], observed[seq.tokens[i] as usize])
    } else {
        info::categorical_kl(&do_mixture, observed)
    }
}
