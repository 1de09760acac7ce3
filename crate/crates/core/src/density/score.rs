//! Model-fidelity scores: cross-entropy loss against the process entropy
//! floor, and the direct kernel-aware KL gap.

use super::{DensityBackend, TokenMatrix};
use crate::error::{Error, Result};
use crate::info;
use crate::scm::{ScmParams, Sequence};
use crate::seed::{self, tag};
use serde::{Deserialize, Serialize};

/// Excess cross-entropy of a model over the process entropy floor,
/// normalized to [0, 1] by the uniform-model gap.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OracleScore {
    /// Mean per-token negative log-likelihood on the validation set, nats.
    pub loss: f64,
    /// Entropy floor H(P) supplied by the caller, nats per token.
    pub entropy_floor: f64,
    /// ln |X|.
    pub h_max: f64,
    /// (loss - floor) / (h_max - floor).
    pub epsilon_hat: f64,
    /// loss - floor, the unnormalized KL gap estimate.
    pub epsilon_raw: f64,
    /// Pinsker bound sqrt(max(epsilon_raw, 0) / 2) on total variation.
    pub tv_delta: f64,
    /// The bound regime requires delta <= 1/2; flagged, not enforced.
    pub tv_exceeds_half: bool,
}

/// Mean per-token negative log-likelihood of a backend on a set of
/// sequences, in nats, including the first token under the empty prefix.
pub fn mean_token_nll(backend: &dyn DensityBackend, seqs: &[Sequence]) -> Result<f64> {
    if seqs.is_empty() {
        return Err(Error::param("evaluation set is empty"));
    }
    let v = backend.vocab_size();
    for s in seqs {
        if s.tokens.iter().any(|&t| t as usize >= v) {
            return Err(Error::mismatch("sequence token outside the model vocabulary"));
        }
    }
    let initial = backend.initial_dist();
    let mut total = 0.0;
    let mut count = 0usize;
    for s in seqs {
        total -= initial[s.tokens[0] as usize].max(info::PROB_FLOOR).ln();
        count += 1;
        if s.len() > 1 {
            let rows = TokenMatrix::from_rows(std::slice::from_ref(&s.tokens));
            let block = backend.eval_positions(&rows, 0, s.len() - 1);
            for t in 1..s.len() {
                let p = block.dist(0, t - 1)[s.tokens[t] as usize];
                total -= p.max(info::PROB_FLOOR).ln();
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}

/// Scores a backend against a validation set given the entropy floor
/// H(P) of the generating process (estimated from the known kernel, or
/// from the minimum observed validation loss when the kernel is
/// unknown).
pub fn oracle_score(
    backend: &dyn DensityBackend,
    val: &[Sequence],
    entropy_floor: f64,
) -> Result<OracleScore> {
    let h_max = (backend.vocab_size() as f64).ln();
    if !(entropy_floor < h_max) {
        return Err(Error::param("entropy floor must be below ln |X|"));
    }
    let loss = mean_token_nll(backend, val)?;
    let epsilon_raw = loss - entropy_floor;
    let tv_delta = (epsilon_raw.max(0.0) / 2.0).sqrt();
    Ok(OracleScore {
        loss,
        entropy_floor,
        h_max,
        epsilon_hat: epsilon_raw / (h_max - entropy_floor),
        epsilon_raw,
        tv_delta,
        tv_exceeds_half: tv_delta > 0.5,
    })
}

/// Monte-Carlo estimate of the mean per-position KL divergence from the
/// true transition kernel to the model, with its standard error over
/// sampled histories.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KlGap {
    pub mean: f64,
    pub std_error: f64,
}

/// Direct, kernel-aware estimate of the model's divergence: sampled
/// trajectories of length `horizon` contribute the mean over positions
/// of KL(true transition || model transition) in nats.
pub fn kl_gap(
    backend: &dyn DensityBackend,
    scm: &ScmParams,
    n_histories: usize,
    horizon: usize,
    gap_seed: u64,
) -> Result<KlGap> {
    if backend.vocab_size() != scm.vocab_size() {
        return Err(Error::mismatch("model and kernel vocabularies differ"));
    }
    if n_histories < 1 || horizon < 1 {
        return Err(Error::param("n_histories and horizon must be at least 1"));
    }
    let initial = backend.initial_dist();
    let mut per_history = Vec::with_capacity(n_histories);
    for h in 0..n_histories {
        let s = scm.sample_sequence(horizon, seed::derive(gap_seed, tag::KL_GAP, &[h as u64]))?;
        let mut acc = kl_floored(&scm.transition_dist(&[])?, &initial);
        if horizon > 1 {
            let rows = TokenMatrix::from_rows(std::slice::from_ref(&s.tokens));
            let block = backend.eval_positions(&rows, 0, horizon - 1);
            for t in 1..horizon {
                let lo = t.saturating_sub(scm.memory());
                let truth = scm.transition_dist(&s.tokens[lo..t])?;
                acc += kl_floored(&truth, block.dist(0, t - 1));
            }
        }
        per_history.push(acc / horizon as f64);
    }
    let (mean, sd) = info::mean_std(&per_history);
    Ok(KlGap { mean, std_error: sd / (n_histories as f64).sqrt() })
}

fn kl_floored(p: &[f64], q: &[f64]) -> f64 {
    info::categorical_kl(p, q)
}
