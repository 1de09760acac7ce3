//! Experiment specification files.
//!
//! A spec JSON pins everything an experiment needs; every stochastic
//! choice is derived from `master_seed`, so re-running any command with
//! the same spec reproduces its outputs byte for byte. CLI flags override
//! individual fields after the file is loaded.

use causeq::engine::{Aggregation, MaxLag, Proposal, TraceConfig};
use causeq::scm::GroundTruthConfig;
use causeq::seed;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Seed-path tags for the harness (distinct from the library's internal
/// domains; these index the top-level experiment structure).
pub mod seed_path {
    pub const SCM: u64 = 1;
    pub const TRAIN_DATA: u64 = 2;
    pub const VAL_DATA: u64 = 3;
    pub const EVAL_DATA: u64 = 4;
    pub const GROUND_TRUTH: u64 = 5;
    pub const TRACE: u64 = 6;
    pub const RANDOM_BASELINE: u64 = 7;
    pub const PERTURB: u64 = 8;
    pub const TRAINING: u64 = 9;
    pub const FLOOR: u64 = 10;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub master_seed: u64,
    pub scm: ScmSpec,
    pub data: DataSpec,
    #[serde(default)]
    pub train: TrainSpec,
    #[serde(default)]
    pub trace: TraceSpec,
    #[serde(default)]
    pub baselines: BaselineSpec,
    #[serde(default)]
    pub ground_truth: GroundTruthSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmSpec {
    pub vocab_size: usize,
    pub memory: usize,
    pub sparsity: f64,
    pub decay_rate: f64,
    /// Fixed weight scale; ignored when `target_predictability` is set.
    #[serde(default = "default_weight_scale")]
    pub weight_scale: f64,
    /// When set, the weight scale is calibrated by bisection until the
    /// predictability score hits this target.
    #[serde(default)]
    pub target_predictability: Option<f64>,
    #[serde(default = "default_bias_scale")]
    pub bias_scale: f64,
}

fn default_weight_scale() -> f64 {
    5.0
}

fn default_bias_scale() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub train_sequences: usize,
    pub val_sequences: usize,
    pub eval_sequences: usize,
    pub seq_len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSpec {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l1_penalty: f64,
    /// Snapshot step counts; empty means "final step only".
    pub checkpoint_steps: Vec<u64>,
}

impl Default for TrainSpec {
    fn default() -> Self {
        TrainSpec {
            learning_rate: 0.8,
            batch_size: 32,
            epochs: 40,
            l1_penalty: 0.0,
            checkpoint_steps: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceSpec {
    pub particles: usize,
    /// None resolves to the vocabulary scaling rule.
    pub threshold: Option<f64>,
    /// None resolves to the default context rule.
    pub context: Option<usize>,
    pub max_lag: MaxLag,
    pub aggregation: Aggregation,
    pub shared_mediators: bool,
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec {
            particles: 256,
            threshold: None,
            context: None,
            max_lag: MaxLag::Full,
            aggregation: Aggregation::AvgThenKl,
            shared_mediators: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSpec {
    pub granger_threshold: f64,
    pub rho: f64,
    pub top_k: usize,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        BaselineSpec { granger_threshold: 0.01, rho: 0.01, top_k: 5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundTruthSpec {
    pub n_counterfactuals: usize,
    pub edge_threshold: f64,
    pub rollout_particles: usize,
    pub binary_event: bool,
}

impl Default for GroundTruthSpec {
    fn default() -> Self {
        let d = GroundTruthConfig::default();
        GroundTruthSpec {
            n_counterfactuals: d.n_counterfactuals,
            edge_threshold: d.edge_threshold,
            rollout_particles: d.rollout_particles,
            binary_event: d.binary_event,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Re-evaluate discovery at each training checkpoint.
    EpsilonCheckpoints,
    Length,
    Memory,
    Vocab,
    Particles,
    Threshold,
    NoiseProb,
    DropProb,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    /// Grid values; integer axes round them.
    pub values: Vec<f64>,
}

impl ExperimentSpec {
    /// The desk-scale default configuration: small enough that the full
    /// pipeline runs in minutes on one machine.
    pub fn desk_default(master_seed: u64) -> Self {
        ExperimentSpec {
            schema_version: SCHEMA_VERSION,
            master_seed,
            scm: ScmSpec {
                vocab_size: 50,
                memory: 3,
                sparsity: 0.05,
                decay_rate: 0.8,
                weight_scale: 5.0,
                target_predictability: None,
                bias_scale: 0.5,
            },
            data: DataSpec {
                train_sequences: 2000,
                val_sequences: 200,
                eval_sequences: 20,
                seq_len: 32,
            },
            train: TrainSpec::default(),
            trace: TraceSpec::default(),
            baselines: BaselineSpec::default(),
            ground_truth: GroundTruthSpec::default(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> causeq::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(causeq::Error::Param(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.data.seq_len < 2 {
            return Err(causeq::Error::Param("seq_len must be at least 2".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(causeq::Error::Param("sweep grid must not be empty".into()));
            }
        }
        Ok(())
    }

    pub fn seed_for(&self, path_tag: u64, indices: &[u64]) -> u64 {
        let mut path = vec![path_tag];
        path.extend_from_slice(indices);
        seed::derive(self.master_seed, HARNESS_DOMAIN, &path)
    }

    /// Resolved context length for a sequence of length `len`.
    pub fn context_for(&self, len: usize) -> causeq::Result<usize> {
        match self.trace.context {
            Some(c) => {
                if c == 0 || c >= len {
                    return Err(causeq::Error::Param(format!(
                        "context {c} outside (0, {len})"
                    )));
                }
                Ok(c)
            }
            None => causeq::engine::default_context(len),
        }
    }

    /// Resolved decision threshold.
    pub fn threshold(&self) -> causeq::Result<f64> {
        match self.trace.threshold {
            Some(t) => Ok(t),
            None => causeq::engine::recommended_threshold(self.scm.vocab_size),
        }
    }

    /// Engine configuration for one evaluation sequence.
    pub fn trace_config(&self, len: usize, seq_index: u64) -> causeq::Result<TraceConfig> {
        Ok(TraceConfig {
            n_particles: self.trace.particles,
            threshold: self.threshold()?,
            context_len: self.context_for(len)?,
            max_lag: self.trace.max_lag,
            proposal: Proposal::Uniform,
            aggregation: self.trace.aggregation,
            shared_mediators: self.trace.shared_mediators,
            seed: self.seed_for(seed_path::TRACE, &[seq_index]),
        })
    }

    pub fn ground_truth_config(&self) -> GroundTruthConfig {
        GroundTruthConfig {
            n_counterfactuals: self.ground_truth.n_counterfactuals,
            edge_threshold: self.ground_truth.edge_threshold,
            rollout_particles: self.ground_truth.rollout_particles,
            binary_event: self.ground_truth.binary_event,
            seed: self.seed_for(seed_path::GROUND_TRUTH, &[]),
        }
    }

    /// Stable hex fingerprint of the full spec content.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        let mut h: u64 = 0xcbf29ce484222325;
        for b in json.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

/// Domain tag separating harness seed derivation from library-internal
/// domains.
const HARNESS_DOMAIN: u64 = 0x6861726e657373;
