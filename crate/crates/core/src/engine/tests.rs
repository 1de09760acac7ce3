use super::*;
use crate::density::{exact_backend, DensityBackend, ProbBlock};
use crate::scm::{ScmGenConfig, ScmParams};
use proptest::prelude::*;

fn independence_scm(vocab: usize, seedv: u64) -> ScmParams {
    ScmParams::generate(&ScmGenConfig {
        vocab_size: vocab,
        memory: 2,
        sparsity: 0.5,
        decay_rate: 0.8,
        weight_scale: 0.0,
        bias_scale: 0.4,
        seed: seedv,
    })
    .unwrap()
}

/// P(x1 = x0) = 0.9 two-state chain.
fn sticky_chain() -> ScmParams {
    let a = 9.0_f64.ln();
    let w = ScmParams::lag_matrix_from_dense(&[vec![a, 0.0], vec![0.0, a]]);
    ScmParams::from_parts(vec![0.0, 0.0], vec![w], vec![1.0], 0).unwrap()
}

/// Independent oracle: enumerates every assignment of the randomized
/// prefix positions. The base arm randomizes positions `j..i-1`, the do
/// arm positions `j+1..i-1`.
fn brute_force_ig(scm: &ScmParams, tokens: &[u32], j: usize, i: usize) -> f64 {
    let v = scm.vocab_size();
    let average = |first_random: usize| -> f64 {
        let slots = i - first_random;
        let mut total = 0.0;
        let count = v.pow(slots as u32);
        for idx in 0..count {
            let mut prefix = tokens[..i].to_vec();
            let mut rem = idx;
            for s in 0..slots {
                prefix[first_random + s] = (rem % v) as u32;
                rem /= v;
            }
            let lo = i.saturating_sub(scm.memory());
            total += scm.transition_dist(&prefix[lo..i]).unwrap()[tokens[i] as usize];
        }
        total / count as f64
    };
    info::binary_kl(average(j), average(j + 1))
}

#[test]
fn default_context_rule() {
    assert_eq!(default_context(64).unwrap(), 20);
    assert_eq!(default_context(300).unwrap(), 30);
    assert_eq!(default_context(21).unwrap(), 19);
    assert!(default_context(1).is_err());
}

#[test]
fn recommended_threshold_scaling() {
    assert!((recommended_threshold(1000).unwrap() - 1.72e-5).abs() < 1e-18);
    assert!((recommended_threshold(100).unwrap() - 1.72e-4).abs() < 1e-18);
    assert!((recommended_threshold(2).unwrap() - 8.6e-3).abs() < 1e-18);
    assert!(recommended_threshold(1).is_err());
}

#[test]
fn error_bound_values() {
    assert_eq!(error_bound(0.0).unwrap().tau, 0.0);
    let b = error_bound(0.05).unwrap();
    assert!((b.delta - 0.025_f64.sqrt()).abs() < 1e-15);
    assert!((b.tau - 1.1427).abs() < 1e-3, "tau {}", b.tau);
    assert!(b.in_regime);
    assert!(!error_bound(0.6).unwrap().in_regime);
    assert!(error_bound(-0.1).is_err());
    // Strictly increasing on [0, 0.5].
    let mut prev = -1.0;
    for k in 0..=50 {
        let t = error_bound(0.01 * k as f64).unwrap().tau;
        assert!(t > prev);
        prev = t;
    }
}

#[test]
fn staircase_layout_and_determinism() {
    let seq = Sequence::new(vec![3, 1, 4, 2], 6, 0).unwrap();
    let cfg = TraceConfig::new(2, 0.0, 1, 42);
    let s = build_staircase(&seq, &cfg).unwrap();
    assert_eq!(s.n_rows, 3);
    for r in 0..3 {
        for l in 0..2 {
            let row = s.row(r, l);
            // Row r keeps the first c + r observed tokens.
            assert_eq!(&row[..1 + r], &seq.tokens[..1 + r], "row {r}");
            assert!(row.iter().all(|&t| t < 6));
        }
    }
    let again = build_staircase(&seq, &cfg).unwrap();
    assert_eq!(s.hash, again.hash);
    assert_eq!(s.tokens, again.tokens);
    let other = build_staircase(&seq, &TraceConfig::new(2, 0.0, 1, 43)).unwrap();
    assert_ne!(s.hash, other.hash);
}

#[test]
fn degenerate_context_has_no_testable_pairs() {
    let seq = Sequence::new(vec![0, 1, 2, 3], 4, 0).unwrap();
    let cfg = TraceConfig::new(4, 0.0, 3, 1);
    let s = build_staircase(&seq, &cfg).unwrap();
    assert_eq!(s.n_rows, 1);
    let scm = independence_scm(4, 0);
    let report = lagged_ig_matrix(&exact_backend(scm), &seq, &cfg).unwrap();
    assert!(report.scores.is_empty());
}

#[test]
fn chain_estimate_matches_brute_force() {
    let scm = sticky_chain();
    let backend = exact_backend(scm.clone());
    let tokens = vec![0, 0, 1];
    let seq = Sequence::new(tokens.clone(), 2, 0).unwrap();
    let exact = brute_force_ig(&scm, &tokens, 1, 2);
    // Analytic check of the oracle itself: base averages 0.1 and 0.9.
    let expect = info::binary_kl(0.5, 0.1);
    assert!((exact - expect).abs() < 1e-12);
    // Per-particle base probabilities are 0.1 or 0.9 (sd 0.4); the
    // delta-method 3-SE band at N=4096 is 3 * (0.4/64) * ln 9 ~ 0.041.
    for seedv in [1u64, 2, 3] {
        let cfg = TraceConfig::new(4096, 0.0, 1, seedv);
        let report = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
        let got = report.score(1, 2).unwrap();
        assert!((got - exact).abs() < 0.042, "seed {seedv}: {got} vs {exact}");
    }
}

#[test]
fn adjacent_pair_do_probability_is_deterministic() {
    // With no mediators between j and i = j+1, the do row conditions on
    // observed tokens only, so p_do equals the backend probability.
    let scm = sticky_chain();
    let backend = exact_backend(scm.clone());
    let seq = Sequence::new(vec![0, 0, 1], 2, 0).unwrap();
    let report = lagged_ig_matrix(&backend, &seq, &TraceConfig::new(64, 0.0, 1, 5)).unwrap();
    let pair = report.scores.iter().find(|s| (s.src, s.dst) == (1, 2)).unwrap();
    let direct = scm.transition_dist(&[0, 0]).unwrap()[1];
    assert!((pair.p_do - direct).abs() < 1e-15);
}

#[test]
fn independence_scores_are_exactly_zero() {
    let scm = independence_scm(6, 9);
    let backend = exact_backend(scm.clone());
    let seq = scm.sample_sequence(16, 3).unwrap();
    let report = lagged_ig_matrix(&backend, &seq, &TraceConfig::new(32, 0.0, 4, 7)).unwrap();
    assert!(!report.scores.is_empty());
    for s in &report.scores {
        assert_eq!(s.score, 0.0, "pair ({}, {})", s.src, s.dst);
        assert!((s.p_base - s.p_do).abs() < 1e-15);
    }
    // kl-then-avg agrees on the analytic zero.
    let mut cfg = TraceConfig::new(32, 0.0, 4, 7);
    cfg.aggregation = Aggregation::KlThenAvg;
    let report = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
    assert!(report.scores.iter().all(|s| s.score == 0.0));
}

#[test]
fn sparse_and_full_reports_are_bitwise_identical() {
    let scm = ScmParams::generate(&ScmGenConfig {
        vocab_size: 10,
        memory: 3,
        sparsity: 0.2,
        decay_rate: 0.8,
        weight_scale: 2.0,
        bias_scale: 0.3,
        seed: 31,
    })
    .unwrap();
    let backend = exact_backend(scm.clone());
    let seq = scm.sample_sequence(24, 4).unwrap();
    let mut full_cfg = TraceConfig::new(16, 1e-4, 6, 11);
    full_cfg.max_lag = MaxLag::Full;
    let mut sparse_cfg = full_cfg;
    sparse_cfg.max_lag = MaxLag::Bounded(24);
    let full = lagged_ig_matrix(&backend, &seq, &full_cfg).unwrap();
    let sparse = lagged_ig_matrix(&backend, &seq, &sparse_cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&full).unwrap(),
        serde_json::to_string(&sparse).unwrap()
    );
}

#[test]
fn bounded_lag_restricts_pairs_and_shrinks_work() {
    let scm = independence_scm(8, 2);
    let backend = exact_backend(scm.clone());
    let seq = scm.sample_sequence(40, 1).unwrap();
    let mut cfg = TraceConfig::new(8, 0.0, 4, 3);
    cfg.max_lag = MaxLag::Bounded(2);
    let sparse = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
    assert!(sparse.scores.iter().all(|s| s.dst - s.src <= 2));
    cfg.max_lag = MaxLag::Full;
    let full = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
    assert!(sparse.op_count < full.op_count / 4);
    assert!(sparse.peak_buffer < full.peak_buffer);
    // Same sequence, doubled length: bounded-lag work roughly doubles.
    let seq2 = scm.sample_sequence(80, 1).unwrap();
    cfg.max_lag = MaxLag::Bounded(2);
    let sparse2 = lagged_ig_matrix(&backend, &seq2, &cfg).unwrap();
    let ratio = sparse2.op_count as f64 / sparse.op_count as f64;
    assert!((1.8..2.4).contains(&ratio), "ratio {ratio}");
}

#[test]
fn discovery_is_deterministic_and_respects_threshold() {
    let scm = ScmParams::generate(&ScmGenConfig {
        vocab_size: 12,
        memory: 2,
        sparsity: 0.1,
        decay_rate: 0.9,
        weight_scale: 3.0,
        bias_scale: 0.4,
        seed: 8,
    })
    .unwrap();
    let backend = exact_backend(scm.clone());
    let seq = scm.sample_sequence(20, 6).unwrap();
    let cfg = TraceConfig::new(64, 1e-3, 5, 13);
    let a = discover_instance_graph(&backend, &seq, &cfg).unwrap();
    let b = discover_instance_graph(&backend, &seq, &cfg).unwrap();
    assert_eq!(a, b);
    for e in &a.edges {
        assert!(e.weight > 1e-3);
        assert!(e.src < e.dst);
        assert!(e.src >= 5);
    }
    // An infinite threshold empties the graph.
    let empty = discover_instance_graph(
        &backend,
        &seq,
        &TraceConfig::new(64, f64::INFINITY, 5, 13),
    );
    assert!(empty.unwrap().edges.is_empty());
}

#[test]
fn shared_mediator_draws_are_reused_across_rows() {
    let seq = Sequence::new(vec![1, 2, 3, 4, 5, 0], 8, 0).unwrap();
    let mut cfg = TraceConfig::new(3, 0.0, 2, 17);
    cfg.shared_mediators = true;
    let s = build_staircase(&seq, &cfg).unwrap();
    for l in 0..3 {
        let row0 = s.row(0, l);
        for r in 1..s.n_rows {
            let row = s.row(r, l);
            // Positions past this row's observed prefix match row 0.
            for p in (2 + r)..6 {
                assert_eq!(row[p], row0[p], "particle {l} row {r} pos {p}");
            }
        }
    }
}

#[test]
fn single_type_vocabulary_scores_zero() {
    // With |X| = 1 every mediator equals the observed token, so the
    // staircase is the observed sequence and all gains vanish.
    struct Constant;
    impl DensityBackend for Constant {
        fn vocab_size(&self) -> usize {
            1
        }
        fn initial_dist(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn eval_positions(&self, rows: &TokenMatrix, lo: usize, hi: usize) -> ProbBlock {
            let mut out = ProbBlock::new(rows.n_rows(), lo, hi, 1);
            out.fill(1.0);
            out
        }
    }
    let seq = Sequence::new(vec![0, 0, 0, 0, 0], 1, 0).unwrap();
    let report = lagged_ig_matrix(&Constant, &seq, &TraceConfig::new(8, 0.0, 1, 3)).unwrap();
    assert!(!report.scores.is_empty());
    assert!(report.scores.iter().all(|s| s.score == 0.0));
}

#[test]
fn max_lag_serde_forms() {
    assert_eq!(serde_json::to_string(&MaxLag::Full).unwrap(), "\"full\"");
    assert_eq!(serde_json::to_string(&MaxLag::Bounded(8)).unwrap(), "8");
    assert_eq!(serde_json::from_str::<MaxLag>("\"full\"").unwrap(), MaxLag::Full);
    assert_eq!(serde_json::from_str::<MaxLag>("8").unwrap(), MaxLag::Bounded(8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn scores_are_never_negative(
        scm_seed in 0u64..200,
        seq_seed in 0u64..50,
        cfg_seed in 0u64..50,
        scale in 0.0f64..4.0,
    ) {
        let scm = ScmParams::generate(&ScmGenConfig {
            vocab_size: 5,
            memory: 2,
            sparsity: 0.4,
            decay_rate: 0.8,
            weight_scale: scale,
            bias_scale: 0.5,
            seed: scm_seed,
        }).unwrap();
        let backend = exact_backend(scm.clone());
        let seq = scm.sample_sequence(10, seq_seed).unwrap();
        for aggregation in [Aggregation::AvgThenKl, Aggregation::KlThenAvg] {
            let mut cfg = TraceConfig::new(16, 0.0, 3, cfg_seed);
            cfg.aggregation = aggregation;
            let report = lagged_ig_matrix(&backend, &seq, &cfg).unwrap();
            prop_assert!(report.scores.iter().all(|s| s.score >= 0.0));
        }
    }
}
