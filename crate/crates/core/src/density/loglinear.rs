//! Trainable log-linear lag model.
//!
//! Same parameter family as the generating kernel: a bias vector plus
//! dense per-lag weight matrices under a fixed geometric decay, mapped
//! through a softmax. Trained by mini-batch SGD on the mean per-token
//! cross-entropy with analytic gradients; the gradient of the logits
//! with respect to lag-k's row `x_{t-k}` is `(softmax - onehot) * decay[k-1]`.

use super::{eval_windowed, DensityBackend, ProbBlock, TokenMatrix};
use crate::error::{Error, Result};
use crate::info;
use crate::scm::Sequence;
use crate::seed::{self, tag};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

/// Model shape; the decay is fixed, not trained.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogLinearConfig {
    pub vocab_size: usize,
    pub memory: usize,
    pub decay_rate: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLinearModel {
    vocab_size: usize,
    memory: usize,
    decay: Vec<f64>,
    decay_rate: f64,
    bias: Vec<f64>,
    /// `weights[k][from * vocab + to]`, dense.
    weights: Vec<Vec<f64>>,
    seed: u64,
    step: u64,
}

impl LogLinearModel {
    /// Zero initialization: the uniform predictor, with loss exactly
    /// `ln |X|` on any data.
    pub fn zeroed(cfg: &LogLinearConfig) -> Result<Self> {
        if cfg.vocab_size < 2 {
            return Err(Error::param("vocab_size must be at least 2"));
        }
        if cfg.memory < 1 {
            return Err(Error::param("memory must be at least 1"));
        }
        if !(cfg.decay_rate > 0.0 && cfg.decay_rate <= 1.0) {
            return Err(Error::param("decay_rate must lie in (0, 1]"));
        }
        let v = cfg.vocab_size;
        Ok(LogLinearModel {
            vocab_size: v,
            memory: cfg.memory,
            decay: (0..cfg.memory).map(|k| cfg.decay_rate.powi(k as i32)).collect(),
            decay_rate: cfg.decay_rate,
            bias: vec![0.0; v],
            weights: vec![vec![0.0; v * v]; cfg.memory],
            seed: cfg.seed,
            step: 0,
        })
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn decay_rate(&self) -> f64 {
        self.decay_rate
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weight(&self, lag: usize, from: usize, to: usize) -> f64 {
        self.weights[lag][from * self.vocab_size + to]
    }

    pub fn weight_mut(&mut self, lag: usize, from: usize, to: usize) -> &mut f64 {
        &mut self.weights[lag][from * self.vocab_size + to]
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    fn dist_into(&self, hist: &[u32], out: &mut [f64]) {
        out.copy_from_slice(&self.bias);
        let lags = self.memory.min(hist.len());
        for k in 1..=lags {
            let from = hist[hist.len() - k] as usize;
            let lambda = self.decay[k - 1];
            let row = &self.weights[k - 1][from * self.vocab_size..(from + 1) * self.vocab_size];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += lambda * w;
            }
        }
        info::softmax_in_place(out);
    }

    /// Mean per-token negative log-likelihood of the model on `seqs`,
    /// in nats, including the first token under the empty prefix.
    pub fn mean_nll(&self, seqs: &[Sequence]) -> f64 {
        let mut dist = vec![0.0; self.vocab_size];
        let mut total = 0.0;
        let mut count = 0usize;
        for s in seqs {
            for t in 0..s.len() {
                let lo = t.saturating_sub(self.memory);
                self.dist_into(&s.tokens[lo..t], &mut dist);
                let p = dist[s.tokens[t] as usize].max(info::PROB_FLOOR);
                total -= p.ln();
                count += 1;
            }
        }
        total / count as f64
    }

    /// Serializes the checkpoint: one JSON header line, then the
    /// parameter block as little-endian f64 (bias, then each lag matrix
    /// row-major).
    pub fn write_checkpoint<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header = CheckpointHeader {
            format_version: CHECKPOINT_FORMAT_VERSION,
            vocab_size: self.vocab_size as u32,
            memory: self.memory as u32,
            decay_rate: self.decay_rate,
            seed: self.seed,
            step: self.step,
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for &b in &self.bias {
            w.write_all(&b.to_le_bytes())?;
        }
        for m in &self.weights {
            for &x in m {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a checkpoint, validating the parameter block size against
    /// the header shapes.
    pub fn read_checkpoint<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| Error::input(format!("checkpoint header: {e}")))?;
        let header: CheckpointHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| Error::input(format!("checkpoint header: {e}")))?;
        if header.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::input(format!(
                "unsupported checkpoint format version {}",
                header.format_version
            )));
        }
        let v = header.vocab_size as usize;
        let m = header.memory as usize;
        let mut model = LogLinearModel::zeroed(&LogLinearConfig {
            vocab_size: v,
            memory: m,
            decay_rate: header.decay_rate,
            seed: header.seed,
        })?;
        model.step = header.step;

        let n_params = v + m * v * v;
        let mut bytes = vec![0u8; n_params * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| Error::input("checkpoint parameter block truncated"))?;
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing).map_err(|e| Error::input(e.to_string()))? != 0 {
            return Err(Error::input("checkpoint has trailing bytes"));
        }
        let mut vals = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        for b in model.bias.iter_mut() {
            *b = vals.next().unwrap();
        }
        for mat in model.weights.iter_mut() {
            for x in mat.iter_mut() {
                *x = vals.next().unwrap();
            }
        }
        Ok(model)
    }
}

impl DensityBackend for LogLinearModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn initial_dist(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.vocab_size];
        self.dist_into(&[], &mut out);
        out
    }

    fn eval_positions(&self, rows: &TokenMatrix, lo: usize, hi: usize) -> ProbBlock {
        eval_windowed(rows, lo, hi, self.vocab_size, self.memory, |hist, out| {
            self.dist_into(hist, out)
        })
    }
}

const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: u32,
    vocab_size: u32,
    memory: u32,
    decay_rate: f64,
    seed: u64,
    step: u64,
}

/// SGD hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Sequences per SGD step.
    pub batch_size: usize,
    pub epochs: usize,
    /// L1 penalty on the lag weights (not the bias); 0 disables it.
    pub l1_penalty: f64,
    pub seed: u64,
}

/// A parameter snapshot with its full-dataset training loss.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub step: u64,
    pub loss: f64,
    pub model: LogLinearModel,
}

/// Training failure carrying whatever snapshots were already taken; the
/// last one is the most recent stable state.
#[derive(Debug)]
pub struct TrainError {
    pub step: u64,
    pub message: String,
    pub completed: Vec<Checkpoint>,
}

impl std::fmt::Display for TrainError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "training diverged at step {}: {}", self.step, self.message)
    }
}

impl std::error::Error for TrainError {}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        Error::Numerical(e.to_string())
    }
}

/// Minimizes the mean per-token cross-entropy by mini-batch SGD,
/// snapshotting the model at each requested step count (0 = the zero
/// initialization). Steps count applied updates; all requested steps
/// must fit inside `epochs * ceil(n_seqs / batch_size)`.
pub fn train_loglinear(
    cfg: &LogLinearConfig,
    data: &[Sequence],
    hyper: &TrainConfig,
    checkpoint_steps: &[u64],
) -> std::result::Result<Vec<Checkpoint>, TrainError> {
    let mut model = LogLinearModel::zeroed(cfg).map_err(|e| TrainError {
        step: 0,
        message: e.to_string(),
        completed: Vec::new(),
    })?;
    let fail = |step: u64, message: String, completed: Vec<Checkpoint>| TrainError {
        step,
        message,
        completed,
    };
    if data.is_empty() {
        return Err(fail(0, "training dataset is empty".into(), Vec::new()));
    }
    if data.iter().any(|s| s.tokens.iter().any(|&t| t as usize >= cfg.vocab_size)) {
        return Err(fail(0, "token out of vocabulary range".into(), Vec::new()));
    }
    if hyper.batch_size < 1 || hyper.learning_rate <= 0.0 {
        return Err(fail(0, "batch_size and learning_rate must be positive".into(), Vec::new()));
    }

    let n_batches = data.len().div_ceil(hyper.batch_size);
    let total_steps = (hyper.epochs * n_batches) as u64;
    let mut wanted: Vec<u64> = checkpoint_steps.to_vec();
    wanted.sort_unstable();
    wanted.dedup();
    if wanted.last().copied().unwrap_or(0) > total_steps {
        return Err(fail(
            0,
            format!("checkpoint step beyond the {total_steps} available updates"),
            Vec::new(),
        ));
    }

    let v = cfg.vocab_size;
    let mut checkpoints = Vec::with_capacity(wanted.len());
    let mut next_ckpt = wanted.iter().copied().peekable();
    let snapshot = |model: &LogLinearModel, step: u64, out: &mut Vec<Checkpoint>| {
        out.push(Checkpoint { step, loss: model.mean_nll(data), model: model.clone() });
    };
    if next_ckpt.peek() == Some(&0) {
        next_ckpt.next();
        snapshot(&model, 0, &mut checkpoints);
    }

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad_bias = vec![0.0f64; v];
    let mut grad_w = vec![vec![0.0f64; v * v]; cfg.memory];
    let mut dist = vec![0.0f64; v];
    let mut step = 0u64;

    for epoch in 0..hyper.epochs {
        shuffle(&mut order, hyper.seed, epoch as u64);
        for batch in order.chunks(hyper.batch_size) {
            grad_bias.iter_mut().for_each(|g| *g = 0.0);
            grad_w.iter_mut().for_each(|m| m.iter_mut().for_each(|g| *g = 0.0));
            let mut batch_loss = 0.0;
            let mut tokens = 0usize;

            for &si in batch {
                let s = &data[si];
                for t in 0..s.len() {
                    let lo = t.saturating_sub(cfg.memory);
                    let hist = &s.tokens[lo..t];
                    model.dist_into(hist, &mut dist);
                    let y = s.tokens[t] as usize;
                    batch_loss -= dist[y].max(info::PROB_FLOOR).ln();
                    tokens += 1;
                    // d loss / d logits = softmax - onehot.
                    for (g, &p) in grad_bias.iter_mut().zip(&dist) {
                        *g += p;
                    }
                    grad_bias[y] -= 1.0;
                    let lags = cfg.memory.min(t);
                    for k in 1..=lags {
                        let from = hist[hist.len() - k] as usize;
                        let lambda = model.decay[k - 1];
                        let row = &mut grad_w[k - 1][from * v..(from + 1) * v];
                        for (g, &p) in row.iter_mut().zip(&dist) {
                            *g += lambda * p;
                        }
                        row[y] -= lambda;
                    }
                }
            }

            let mean_loss = batch_loss / tokens as f64;
            if !mean_loss.is_finite() {
                return Err(fail(step, format!("batch loss {mean_loss}"), checkpoints));
            }
            let scale = hyper.learning_rate / tokens as f64;
            for (b, g) in model.bias.iter_mut().zip(&grad_bias) {
                *b -= scale * g;
            }
            for (m, g) in model.weights.iter_mut().zip(&grad_w) {
                for (w, gi) in m.iter_mut().zip(g) {
                    *w -= scale * gi;
                    if hyper.l1_penalty > 0.0 {
                        *w -= hyper.learning_rate * hyper.l1_penalty * w.signum();
                    }
                }
            }
            step += 1;
            model.step = step;
            if next_ckpt.peek() == Some(&step) {
                next_ckpt.next();
                snapshot(&model, step, &mut checkpoints);
            }
        }
    }
    Ok(checkpoints)
}

fn shuffle(order: &mut [usize], train_seed: u64, epoch: u64) {
    use rand::Rng;
    let mut rng = seed::rng(train_seed, tag::TRAIN_SHUFFLE, &[epoch]);
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}
