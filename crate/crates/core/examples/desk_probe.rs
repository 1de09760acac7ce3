//! Scratch probe for desk-scale benchmark tuning (not part of the API).

use causeq::baselines::granger_graph_from_report;
use causeq::density::exact_backend;
use causeq::engine::{graph_from_report, lagged_ig_matrix, TraceConfig};
use causeq::metrics::{aggregate, compare_graphs};
use causeq::scm::{
    ground_truth_instance_graph, perturb_sequence, GroundTruthConfig, PerturbationConfig,
    ScmGenConfig, ScmParams,
};
use causeq::seed;

fn main() {
    let (vocab, memory, len, c, n_particles) = (50usize, 3usize, 32usize, 20usize, 256usize);
    let tau_grid = [1e-3, 3.162e-3, 1e-2, 3.162e-2, 1e-1];
    let granger_grid = [1e-3, 3.162e-3, 1e-2, 3.162e-2, 1e-1];

    for scm_seed in [424242u64, 7, 99] {
        let cfg = ScmGenConfig {
            vocab_size: vocab,
            memory,
            sparsity: 0.05,
            decay_rate: 0.8,
            weight_scale: 5.0,
            bias_scale: 0.5,
            seed: scm_seed,
        };
        let scm = ScmParams::generate(&cfg).unwrap();
        let pred = scm.estimate_predictability(128, 24, 5).unwrap();
        let backend = exact_backend(scm.clone());
        let gt_cfg = GroundTruthConfig { seed: 7, binary_event: true, ..Default::default() };

        let seqs: Vec<_> = (0..20)
            .map(|i| scm.sample_sequence(len, seed::derive(99, 0xd5, &[i])).unwrap())
            .collect();
        let truths: Vec<_> = seqs
            .iter()
            .map(|s| ground_truth_instance_graph(&scm, s, &gt_cfg, c).unwrap())
            .collect();
        let total_edges: usize = truths.iter().map(|t| t.edges.len()).sum();

        let reports: Vec<_> = seqs
            .iter()
            .map(|s| {
                lagged_ig_matrix(&backend, s, &TraceConfig::new(n_particles, 0.0, c, 1234))
                    .unwrap()
            })
            .collect();

        let tune = |f: &dyn Fn(&causeq::engine::CmiReport, f64) -> causeq::InstanceGraph,
                    grid: &[f64]| {
            let mut best = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            for &tau in grid {
                let scores: Vec<_> = reports
                    .iter()
                    .zip(&truths)
                    .map(|(r, t)| compare_graphs(&f(r, tau), t).unwrap())
                    .collect();
                let m = aggregate(&scores).unwrap();
                if m.f1_mean > best.1 {
                    best = (tau, m.f1_mean, m.precision_mean, m.recall_mean);
                }
            }
            best
        };
        let trace_best = tune(&|r, t| graph_from_report(r, t).unwrap(), &tau_grid);
        let granger_best =
            tune(&|r, t| granger_graph_from_report(r, t).unwrap(), &granger_grid);

        println!(
            "scm {scm_seed}: pred {:.3} edges {total_edges} | TRACE tau {:.1e} F1 {:.3} P {:.3} R {:.3} | GRANGER thr {:.1e} F1 {:.3}",
            pred.score, trace_best.0, trace_best.1, trace_best.2, trace_best.3,
            granger_best.0, granger_best.1
        );

        // Noise robustness at the tuned tau.
        for p_noise in [0.0, 0.2, 0.4] {
            let scores: Vec<_> = seqs
                .iter()
                .zip(&truths)
                .enumerate()
                .map(|(i, (s, t))| {
                    let perturbed = perturb_sequence(
                        s,
                        &PerturbationConfig::noise(p_noise, 1000 + i as u64).unwrap(),
                    )
                    .unwrap();
                    let report = lagged_ig_matrix(
                        &backend,
                        &perturbed.seq,
                        &TraceConfig::new(n_particles, 0.0, c, 1234),
                    )
                    .unwrap();
                    let g = graph_from_report(&report, trace_best.0).unwrap();
                    compare_graphs(&g, t).unwrap()
                })
                .collect();
            let m = aggregate(&scores).unwrap();
            println!(
                "  noise {p_noise}: F1 {:.3} P {:.3} R {:.3}",
                m.f1_mean, m.precision_mean, m.recall_mean
            );
        }
    }
}
