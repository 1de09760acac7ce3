//! Batched next-token density estimation.
//!
//! [`DensityBackend`] is the contract the discovery engine is written
//! against: given a batch of token rows, produce the model's distribution
//! over the next token at each requested position. Two backends ship
//! here: [`ExactScmBackend`] wraps a known kernel (the zero-error limit)
//! and [`LogLinearModel`] is trainable from data. Evaluation is read-only
//! and safe to call concurrently.

mod loglinear;
mod score;

pub use loglinear::{
    train_loglinear, Checkpoint, LogLinearConfig, LogLinearModel, TrainConfig, TrainError,
};
pub use score::{kl_gap, mean_token_nll, oracle_score, KlGap, OracleScore};

use crate::scm::ScmParams;
use rayon::prelude::*;

/// A rectangular batch of token rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenMatrix {
    data: Vec<u32>,
    n_rows: usize,
    n_cols: usize,
}

impl TokenMatrix {
    pub fn zeroed(n_rows: usize, n_cols: usize) -> Self {
        TokenMatrix { data: vec![0; n_rows * n_cols], n_rows, n_cols }
    }

    pub fn from_rows(rows: &[Vec<u32>]) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in rows {
            assert_eq!(r.len(), n_cols, "ragged batch");
            data.extend_from_slice(r);
        }
        TokenMatrix { data, n_rows, n_cols }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [u32] {
        &mut self.data[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn tokens(&self) -> &[u32] {
        &self.data
    }
}

/// Next-token distributions for positions `lo..hi` of every row of a
/// batch; `dist(r, p)` is the distribution over the token following
/// prefix `row_r[0..=p]`.
#[derive(Debug, Clone)]
pub struct ProbBlock {
    data: Vec<f64>,
    n_rows: usize,
    lo: usize,
    hi: usize,
    vocab: usize,
}

impl ProbBlock {
    pub(crate) fn new(n_rows: usize, lo: usize, hi: usize, vocab: usize) -> Self {
        ProbBlock { data: vec![0.0; n_rows * (hi - lo) * vocab], n_rows, lo, hi, vocab }
    }

    #[cfg(test)]
    pub(crate) fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn positions(&self) -> std::ops::Range<usize> {
        self.lo..self.hi
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn dist(&self, row: usize, pos: usize) -> &[f64] {
        debug_assert!((self.lo..self.hi).contains(&pos));
        let span = self.hi - self.lo;
        let base = (row * span + (pos - self.lo)) * self.vocab;
        &self.data[base..base + self.vocab]
    }

    /// Number of probability entries held.
    pub fn entries(&self) -> usize {
        self.data.len()
    }
}

/// Batched conditional density oracle. Implementations must be pure
/// under evaluation (no interior mutation), so shared references can be
/// evaluated from many threads at once.
pub trait DensityBackend: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Distribution over the first token, i.e. the empty-prefix case.
    fn initial_dist(&self) -> Vec<f64>;

    /// Next-token distributions at positions `lo..hi` (exclusive) of
    /// every row. Position `p` conditions on `row[0..=p]`, so `hi` is at
    /// most `n_cols`. Tokens must be below `vocab_size`.
    fn eval_positions(&self, rows: &TokenMatrix, lo: usize, hi: usize) -> ProbBlock;

    /// Full-width evaluation: every position of every row.
    fn eval_batch(&self, rows: &TokenMatrix) -> ProbBlock {
        self.eval_positions(rows, 0, rows.n_cols())
    }
}

/// Shared row-parallel evaluation driver for backends whose per-position
/// distribution depends only on a bounded suffix of the prefix.
fn eval_windowed<F>(
    rows: &TokenMatrix,
    lo: usize,
    hi: usize,
    vocab: usize,
    memory: usize,
    f: F,
) -> ProbBlock
where
    F: Fn(&[u32], &mut [f64]) + Sync,
{
    assert!(hi <= rows.n_cols() && lo <= hi, "position range out of bounds");
    let mut block = ProbBlock::new(rows.n_rows(), lo, hi, vocab);
    let span = hi - lo;
    let stride = span * vocab;
    block
        .data
        .par_chunks_mut(stride)
        .enumerate()
        .for_each(|(r, chunk)| {
            let row = rows.row(r);
            for p in lo..hi {
                let start = (p + 1).saturating_sub(memory);
                let out = &mut chunk[(p - lo) * vocab..(p - lo + 1) * vocab];
                f(&row[start..=p], out);
            }
        });
    block
}

/// The zero-error oracle: delegates to the true transition kernel.
#[derive(Debug, Clone)]
pub struct ExactScmBackend {
    scm: ScmParams,
}

impl ExactScmBackend {
    pub fn new(scm: ScmParams) -> Self {
        ExactScmBackend { scm }
    }

    pub fn scm(&self) -> &ScmParams {
        &self.scm
    }
}

/// Convenience constructor mirroring the backend's role.
pub fn exact_backend(scm: ScmParams) -> ExactScmBackend {
    ExactScmBackend::new(scm)
}

impl DensityBackend for ExactScmBackend {
    fn vocab_size(&self) -> usize {
        self.scm.vocab_size()
    }

    fn initial_dist(&self) -> Vec<f64> {
        self.scm.transition_dist(&[]).expect("empty history is valid")
    }

    fn eval_positions(&self, rows: &TokenMatrix, lo: usize, hi: usize) -> ProbBlock {
        eval_windowed(rows, lo, hi, self.scm.vocab_size(), self.scm.memory(), |hist, out| {
            self.scm.transition_into(hist, out).expect("tokens validated by caller")
        })
    }
}
