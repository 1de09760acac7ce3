//! Measurement perturbations: token noise and temporal drops.

use super::Sequence;
use crate::error::{Error, Result};
use crate::seed::{self, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Either token replacement noise or position drops; at most one of the
/// probabilities may be nonzero per experiment arm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub noise_prob: f64,
    pub drop_prob: f64,
    pub seed: u64,
}

impl PerturbationConfig {
    pub fn noise(p: f64, seed: u64) -> Result<Self> {
        Self::new(p, 0.0, seed)
    }

    pub fn drop(p: f64, seed: u64) -> Result<Self> {
        Self::new(0.0, p, seed)
    }

    pub fn new(noise_prob: f64, drop_prob: f64, seed: u64) -> Result<Self> {
        for p in [noise_prob, drop_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::param("perturbation probabilities must lie in [0, 1]"));
            }
        }
        if noise_prob > 0.0 && drop_prob > 0.0 {
            return Err(Error::param(
                "at most one of noise_prob and drop_prob may be nonzero",
            ));
        }
        Ok(PerturbationConfig { noise_prob, drop_prob, seed })
    }
}

/// A perturbed sequence plus the original index of every surviving
/// position, so drop-mode discoveries can be mapped back onto the
/// unperturbed ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Perturbed {
    pub seq: Sequence,
    pub kept: Vec<u32>,
}

/// Applies the configured perturbation. Noise replaces each token
/// independently with a uniform draw; drops delete positions
/// independently and re-compact the indices. Deterministic in
/// `cfg.seed`; the all-zero config returns the input unchanged.
pub fn perturb_sequence(seq: &Sequence, cfg: &PerturbationConfig) -> Result<Perturbed> {
    let identity: Vec<u32> = (0..seq.len() as u32).collect();
    if cfg.noise_prob == 0.0 && cfg.drop_prob == 0.0 {
        return Ok(Perturbed { seq: seq.clone(), kept: identity });
    }

    if cfg.noise_prob > 0.0 {
        let mut rng = seed::rng(cfg.seed, tag::PERTURB_NOISE, &[seq.seed]);
        let tokens = seq
            .tokens
            .iter()
            .map(|&t| {
                if rng.gen::<f64>() < cfg.noise_prob {
                    rng.gen_range(0..seq.vocab_size)
                } else {
                    t
                }
            })
            .collect();
        let mut out = seq.clone();
        out.tokens = tokens;
        return Ok(Perturbed { seq: out, kept: identity });
    }

    let mut rng = seed::rng(cfg.seed, tag::PERTURB_DROP, &[seq.seed]);
    let mut tokens = Vec::with_capacity(seq.len());
    let mut kept = Vec::with_capacity(seq.len());
    for (i, &t) in seq.tokens.iter().enumerate() {
        if rng.gen::<f64>() >= cfg.drop_prob {
            tokens.push(t);
            kept.push(i as u32);
        }
    }
    if tokens.is_empty() {
        return Err(Error::input("drop perturbation removed every position"));
    }
    let mut out = seq.clone();
    out.tokens = tokens;
    Ok(Perturbed { seq: out, kept })
}
