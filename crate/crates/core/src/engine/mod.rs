//! Discovery engine: staircase interventions scored through a density
//! backend.
//!
//! For a sequence of length `L` with context `c`, the intervention batch
//! has `R = L - c` rows per particle. Row `r` keeps the observed tokens
//! at positions `0..c+r-1` and replaces positions `c+r..L-1` with i.i.d.
//! proposal draws, so row 0 randomizes everything after the context and
//! each following row fixes one more observed token. For a candidate
//! pair `j -> i` the row that observes through `j` is the intervention
//! ("do") row and the previous row, where `j` itself is randomized, is
//! the baseline: both randomize the mediators strictly between `j` and
//! `i`, so the score isolates the direct effect. The per-pair score is
//! the binary KL divergence between the baseline and do probabilities of
//! the observed token at `i`, averaged over particles.
//!
//! Bounding the tested lag (`max_lag`) keeps, per row, only the scalar
//! event probabilities needed for nearby targets, which moves the work
//! and the probability buffer from quadratic to linear in `L`.

use crate::density::{DensityBackend, TokenMatrix};
use crate::error::{Error, Result};
use crate::graph::{Edge, InstanceGraph, PairMask, SummaryGraph};
use crate::info;
use crate::scm::Sequence;
use crate::seed::{self, tag};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How far back candidate causes may reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxLag {
    /// Test every pair after the context (quadratic in sequence length).
    Full,
    /// Test only pairs with `i - j <= m` (linear in sequence length).
    #[serde(untagged)]
    Bounded(usize),
}

/// Proposal distribution for mediator draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Proposal {
    Uniform,
}

/// Particle aggregation order for the pair score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Average event probabilities over particles, then one binary KL.
    #[serde(rename = "avg-then-kl")]
    AvgThenKl,
    /// One binary KL per particle, then the particle average.
    #[serde(rename = "kl-then-avg")]
    KlThenAvg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub n_particles: usize,
    /// Edge threshold in nats.
    pub threshold: f64,
    pub context_len: usize,
    pub max_lag: MaxLag,
    pub proposal: Proposal,
    pub aggregation: Aggregation,
    /// Share mediator draws across rows of the same particle (variance
    /// reduction); independent draws per row otherwise.
    pub shared_mediators: bool,
    pub seed: u64,
}

impl TraceConfig {
    pub fn new(n_particles: usize, threshold: f64, context_len: usize, seed: u64) -> Self {
        TraceConfig {
            n_particles,
            threshold,
            context_len,
            max_lag: MaxLag::Full,
            proposal: Proposal::Uniform,
            aggregation: Aggregation::AvgThenKl,
            shared_mediators: false,
            seed,
        }
    }
}

/// The configuration a report was actually produced under, with the
/// derived quantities resolved (clamped lag bound, sequence length), so
/// that equivalent requests serialize identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTraceConfig {
    pub n_particles: usize,
    pub threshold: f64,
    pub context_len: usize,
    /// `min(max_lag, L - 1 - c)`; the full mode resolves to the largest
    /// testable gap.
    pub effective_max_lag: usize,
    pub proposal: Proposal,
    pub aggregation: Aggregation,
    pub shared_mediators: bool,
    pub seed: u64,
    pub seq_len: usize,
}

/// Score and particle-averaged event probabilities for one ordered pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub src: u32,
    pub dst: u32,
    /// Monte-Carlo lagged information gain, nats; never negative.
    pub score: f64,
    /// Mean probability of the observed effect token with the cause
    /// randomized.
    pub p_base: f64,
    /// Mean probability with the cause observed.
    pub p_do: f64,
}

/// Per-pair information-gain scores for one sequence, plus the work and
/// memory accounting used by the scaling benchmarks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmiReport {
    pub seq_len: usize,
    /// Sorted by (src, dst); exactly the testable pairs.
    pub scores: Vec<PairScore>,
    pub config: ResolvedTraceConfig,
    /// Probability entries requested from the backend.
    pub op_count: u64,
    /// Modeled peak number of live probability scalars (retained event
    /// probabilities plus the largest per-row transient), assuming rows
    /// are processed one at a time.
    pub peak_buffer: u64,
    /// Hash of the full intervention batch (base row included), for
    /// verifying that two methods consumed identical interventions.
    pub batch_hash: u64,
}

impl CmiReport {
    pub fn testable_mask(&self) -> PairMask {
        PairMask::from_pairs(self.scores.iter().map(|s| (s.src, s.dst)).collect())
    }

    pub fn score(&self, src: u32, dst: u32) -> Option<f64> {
        self.scores
            .binary_search_by_key(&(src, dst), |s| (s.src, s.dst))
            .ok()
            .map(|idx| self.scores[idx].score)
    }
}

/// The materialized intervention batch: `R = L - c` rows per particle,
/// stored row-major by staircase row (`tokens` row index `r * N + l`).
#[derive(Debug, Clone)]
pub struct Staircase {
    pub tokens: TokenMatrix,
    pub n_particles: usize,
    pub n_rows: usize,
    pub context: usize,
    pub len: usize,
    pub hash: u64,
}

impl Staircase {
    /// Tokens of staircase row `r` for particle `l`.
    pub fn row(&self, r: usize, l: usize) -> &[u32] {
        self.tokens.row(r * self.n_particles + l)
    }
}

/// Default context rule: `max(floor(0.1 L), 20)`, clamped into the
/// testable range.
pub fn default_context(len: usize) -> Result<usize> {
    if len < 2 {
        return Err(Error::param("sequence length must be at least 2"));
    }
    let c = ((len as f64) * 0.1).floor() as usize;
    Ok(c.max(20).min(len - 2).max(1))
}

/// Scaling rule for the decision threshold: `1.72e-2 / |X|`.
pub fn recommended_threshold(vocab_size: usize) -> Result<f64> {
    if vocab_size < 2 {
        return Err(Error::param("vocab_size must be at least 2"));
    }
    Ok(1.72e-2 / vocab_size as f64)
}

/// Asymptotic score perturbation a model with KL gap `eps` can induce:
/// `2 d ln 2 + 2 (1 + d) h_b(d / (1 + d))` with `d = sqrt(eps / 2)`.
/// Outside `d <= 1/2` the bound leaves its validity regime and is
/// flagged rather than rejected.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ErrorBound {
    pub tau: f64,
    pub delta: f64,
    pub in_regime: bool,
}

pub fn error_bound(eps: f64) -> Result<ErrorBound> {
    if !(eps >= 0.0) {
        return Err(Error::param("eps must be non-negative"));
    }
    let delta = (eps / 2.0).sqrt();
    let tau = 2.0 * delta * 2.0_f64.ln()
        + 2.0 * (1.0 + delta) * info::binary_entropy(delta / (1.0 + delta));
    Ok(ErrorBound { tau, delta, in_regime: delta <= 0.5 })
}

fn validate(backend: &dyn DensityBackend, seq: &Sequence, cfg: &TraceConfig) -> Result<usize> {
    let len = seq.len();
    if cfg.n_particles < 1 {
        return Err(Error::param("n_particles must be at least 1"));
    }
    if !(cfg.threshold >= 0.0) {
        return Err(Error::param("threshold must be non-negative"));
    }
    if cfg.context_len == 0 || cfg.context_len >= len {
        return Err(Error::param("context_len must satisfy 0 < c < L"));
    }
    if seq.vocab_size as usize != backend.vocab_size() {
        return Err(Error::mismatch("sequence vocabulary does not match the backend"));
    }
    if seq.tokens.iter().any(|&t| t as usize >= backend.vocab_size()) {
        return Err(Error::input("token out of vocabulary range"));
    }
    let max_gap = len - 1 - cfg.context_len;
    Ok(match cfg.max_lag {
        MaxLag::Full => max_gap,
        MaxLag::Bounded(m) => {
            if m < 1 {
                return Err(Error::param("max_lag bound must be at least 1"));
            }
            m.min(max_gap)
        }
    })
}

/// Mediator values for one (particle, row): positions `c+r..L-1`.
/// Independent per row, unless draws are shared across rows of the same
/// particle.
fn mediators(cfg: &TraceConfig, vocab: usize, shared: Option<&[u32]>, r: usize, l: usize, len: usize) -> Vec<u32> {
    let c = cfg.context_len;
    let start = c + r;
    match shared {
        Some(table) => table[start - c..len - c].to_vec(),
        None => {
            let mut rng = seed::rng(cfg.seed, tag::MEDIATOR, &[l as u64, r as u64]);
            (start..len).map(|_| rng.gen_range(0..vocab as u32)).collect()
        }
    }
}

fn shared_tables(cfg: &TraceConfig, vocab: usize, len: usize) -> Option<Vec<Vec<u32>>> {
    if !cfg.shared_mediators {
        return None;
    }
    let c = cfg.context_len;
    Some(
        (0..cfg.n_particles)
            .map(|l| {
                let mut rng = seed::rng(cfg.seed, tag::MEDIATOR, &[l as u64]);
                (c..len).map(|_| rng.gen_range(0..vocab as u32)).collect()
            })
            .collect(),
    )
}

/// Token batch for staircase row `r`: one row per particle.
fn row_block(
    seq: &Sequence,
    cfg: &TraceConfig,
    vocab: usize,
    tables: Option<&[Vec<u32>]>,
    r: usize,
) -> TokenMatrix {
    let len = seq.len();
    let observed = cfg.context_len + r;
    let mut block = TokenMatrix::zeroed(cfg.n_particles, len);
    for l in 0..cfg.n_particles {
        let row = block.row_mut(l);
        row[..observed].copy_from_slice(&seq.tokens[..observed]);
        let med = mediators(cfg, vocab, tables.map(|t| t[l].as_slice()), r, l, len);
        row[observed..].copy_from_slice(&med);
    }
    block
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf29ce484222325)
    }
    fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
    fn write_u32s(&mut self, vs: &[u32]) {
        for &v in vs {
            self.0 ^= v as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }
}

/// Builds the full intervention batch. Deterministic in `cfg.seed`; the
/// hash covers every token of every row.
pub fn build_staircase(seq: &Sequence, cfg: &TraceConfig) -> Result<Staircase> {
    struct NullBackend(usize);
    impl DensityBackend for NullBackend {
        fn vocab_size(&self) -> usize {
            self.0
        }
        fn initial_dist(&self) -> Vec<f64> {
            vec![1.0 / self.0 as f64; self.0]
        }
        fn eval_positions(&self, rows: &TokenMatrix, lo: usize, hi: usize) -> crate::density::ProbBlock {
            let _ = (rows, lo, hi);
            unreachable!("staircase construction never evaluates")
        }
    }
    validate(&NullBackend(seq.vocab_size as usize), seq, cfg)?;

    let len = seq.len();
    let n_rows = len - cfg.context_len;
    let vocab = seq.vocab_size as usize;
    let tables = shared_tables(cfg, vocab, len);
    let mut tokens = TokenMatrix::zeroed(n_rows * cfg.n_particles, len);
    let mut hash = Fnv::new();
    hash.write_u64(len as u64);
    hash.write_u64(cfg.context_len as u64);
    hash.write_u64(cfg.n_particles as u64);
    for r in 0..n_rows {
        let block = row_block(seq, cfg, vocab, tables.as_deref(), r);
        for l in 0..cfg.n_particles {
            hash.write_u32s(block.row(l));
            tokens.row_mut(r * cfg.n_particles + l).copy_from_slice(block.row(l));
        }
    }
    Ok(Staircase {
        tokens,
        n_particles: cfg.n_particles,
        n_rows,
        context: cfg.context_len,
        len,
        hash: hash.0,
    })
}

/// Target range `(lo..=hi)` whose event probabilities row `r` must
/// provide, or `None` when the row feeds no pair.
fn row_targets(r: usize, c: usize, len: usize, m_eff: usize) -> Option<(usize, usize)> {
    let last = len - 1;
    let mut lo = usize::MAX;
    let mut hi = 0;
    if r >= 1 {
        // Do-row for the pair whose cause is the last observed token.
        let j = c + r - 1;
        lo = lo.min(j + 1);
        hi = hi.max((j + m_eff).min(last));
    }
    if c + r <= len - 2 {
        // Base row for the next pair: the cause is the first draw.
        let j = c + r;
        lo = lo.min(j + 1);
        hi = hi.max((j + m_eff).min(last));
    }
    if lo == usize::MAX || hi < lo {
        None
    } else {
        Some((lo, hi))
    }
}

/// Event probabilities extracted from one evaluated row block.
struct RowEvals {
    lo: usize,
    hi: usize,
    /// `data[l * span + (i - lo)]`, span = hi - lo + 1.
    data: Vec<f64>,
}

impl RowEvals {
    fn get(&self, l: usize, i: usize) -> f64 {
        self.data[l * (self.hi - self.lo + 1) + (i - self.lo)]
    }
}

/// Evaluates the staircase through the backend and scores every testable
/// pair with the lagged information gain. Pure in (backend parameters,
/// seq, cfg); the row loop is data-parallel with per-row seeds, so any
/// schedule produces the same report, and a bounded lag with
/// `m >= L - 1 - c` reproduces the full mode bit for bit.
pub fn lagged_ig_matrix(
    backend: &dyn DensityBackend,
    seq: &Sequence,
    cfg: &TraceConfig,
) -> Result<CmiReport> {
    let m_eff = validate(backend, seq, cfg)?;
    let len = seq.len();
    let c = cfg.context_len;
    let n_rows = len - c;
    let vocab = backend.vocab_size();
    let n = cfg.n_particles;
    let tables = shared_tables(cfg, vocab, len);

    let per_row: Vec<(u64, Option<RowEvals>)> = (0..n_rows)
        .into_par_iter()
        .map(|r| {
            let block = row_block(seq, cfg, vocab, tables.as_deref(), r);
            let mut hash = Fnv::new();
            for l in 0..n {
                hash.write_u32s(block.row(l));
            }
            let evals = row_targets(r, c, len, m_eff).map(|(lo, hi)| {
                let probs = backend.eval_positions(&block, lo - 1, hi);
                let span = hi - lo + 1;
                let mut data = vec![0.0; n * span];
                for l in 0..n {
                    for i in lo..=hi {
                        data[l * span + (i - lo)] =
                            probs.dist(l, i - 1)[seq.tokens[i] as usize];
                    }
                }
                RowEvals { lo, hi, data }
            });
            (hash.0, evals)
        })
        .collect();

    let mut hash = Fnv::new();
    hash.write_u64(len as u64);
    hash.write_u64(c as u64);
    hash.write_u64(n as u64);
    let mut op_count = 0u64;
    let mut retained = 0u64;
    let mut peak_buffer = 0u64;
    for (h, evals) in &per_row {
        hash.write_u64(*h);
        if let Some(e) = evals {
            let span = (e.hi - e.lo + 1) as u64;
            op_count += n as u64 * span * vocab as u64;
            retained += n as u64 * span;
            peak_buffer = peak_buffer.max(retained + n as u64 * span * vocab as u64);
        }
    }

    let mut scores = Vec::new();
    for j in c..=len - 2 {
        let r_do = j - c + 1;
        let r_base = j - c;
        let (do_e, base_e) = match (&per_row[r_do].1, &per_row[r_base].1) {
            (Some(d), Some(b)) => (d, b),
            _ => continue,
        };
        for i in (j + 1)..=(j + m_eff).min(len - 1) {
            let (mut sum_base, mut sum_do) = (0.0, 0.0);
            let mut kl_sum = 0.0;
            for l in 0..n {
                let pb = base_e.get(l, i);
                let pd = do_e.get(l, i);
                sum_base += pb;
                sum_do += pd;
                if cfg.aggregation == Aggregation::KlThenAvg {
                    kl_sum += info::binary_kl(pb, pd);
                }
            }
            let p_base = sum_base / n as f64;
            let p_do = sum_do / n as f64;
            let score = match cfg.aggregation {
                Aggregation::AvgThenKl => info::binary_kl(p_base, p_do),
                Aggregation::KlThenAvg => {
                    let s = kl_sum / n as f64;
                    if s < info::SCORE_EPSILON {
                        0.0
                    } else {
                        s
                    }
                }
            };
            scores.push(PairScore { src: j as u32, dst: i as u32, score, p_base, p_do });
        }
    }
    scores.sort_by_key(|s| (s.src, s.dst));

    Ok(CmiReport {
        seq_len: len,
        scores,
        config: ResolvedTraceConfig {
            n_particles: n,
            threshold: cfg.threshold,
            context_len: c,
            effective_max_lag: m_eff,
            proposal: cfg.proposal,
            aggregation: cfg.aggregation,
            shared_mediators: cfg.shared_mediators,
            seed: cfg.seed,
            seq_len: len,
        },
        op_count,
        peak_buffer,
        batch_hash: hash.0,
    })
}

/// Thresholds the information-gain scores into an instance graph.
pub fn discover_instance_graph(
    backend: &dyn DensityBackend,
    seq: &Sequence,
    cfg: &TraceConfig,
) -> Result<InstanceGraph> {
    let report = lagged_ig_matrix(backend, seq, cfg)?;
    graph_from_report(&report, cfg.threshold)
}

/// Re-thresholds an existing report (used by threshold sweeps).
pub fn graph_from_report(report: &CmiReport, threshold: f64) -> Result<InstanceGraph> {
    let edges: Vec<Edge> = report
        .scores
        .iter()
        .filter(|s| s.score > threshold)
        .map(|s| Edge { src: s.src, dst: s.dst, weight: s.score })
        .collect();
    InstanceGraph::new(report.seq_len, edges, report.testable_mask())
}

/// Projects an instance graph onto the sequence's event types.
pub fn project_summary(graph: &InstanceGraph, seq: &Sequence) -> Result<SummaryGraph> {
    SummaryGraph::project(graph, &seq.tokens)
}

#[cfg(test)]
mod tests;
