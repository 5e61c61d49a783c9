use proptest::prelude::*;
use ugaar_core::data::{split, synth_dataset, Modality, SynthConfig};
use ugaar_core::eval::{evaluate_all, evaluate_embeddings, metrics_from_ranks, DIRECTIONS};
use ugaar_core::generator::{embed, GeneratorParams};
use ugaar_core::numkit::DenseMatrix;
use ugaar_core::pipeline::{run_experiment, ExperimentConfig};
use ugaar_core::trainer::TrainConfig;

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n: 200,
        latent_dim: 4,
        audio_dim: 10,
        sheet_dim: 8,
        lyrics_dim: 6,
        noise_sigma: 0.2,
        seed,
    }
}

#[test]
fn shared_latent_embeddings_are_retrieved_perfectly() {
    let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64, (i as f64 * 0.7).sin()]).collect();
    let latent = DenseMatrix::from_rows(&rows).unwrap();
    let report = evaluate_embeddings(&[latent.clone(), latent.clone(), latent], "copy").unwrap();
    assert_eq!(report.directions.len(), 6);
    for d in &report.directions {
        assert_eq!(d.metrics.recall_at_1, 100.0);
        assert_eq!(d.metrics.median_rank, 1.0);
    }
}

#[test]
fn zero_branches_rank_every_truth_last() {
    let data = synth_dataset(&small_synth(1)).unwrap();
    let gen = GeneratorParams::zeros([10, 8, 6], 5, 4, 1.0).unwrap();
    let report = evaluate_all(&gen, &data, "zero").unwrap();
    for d in &report.directions {
        assert_eq!(d.metrics.median_rank, 200.0);
        assert_eq!(d.metrics.recall_at_10, 0.0);
    }
}

#[test]
fn trained_report_matches_oracle_recomputation() {
    let data = synth_dataset(&small_synth(2)).unwrap();
    let cfg = ExperimentConfig {
        train: TrainConfig {
            common_dim: 8,
            hidden_dim: 16,
            projection_dim: 6,
            batch_size: 16,
            epochs: 4,
            lr_g: 1e-3,
            lr_d: 1e-3,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let exp = run_experiment(&cfg, &data).unwrap();
    let test = &exp.splits.test;
    let gen = &exp.model.generator;
    let embedded = |m: Modality| -> Vec<Vec<f64>> {
        test.table(m)
            .vectors()
            .iter_rows()
            .map(|r| embed(gen, r, m).unwrap())
            .collect()
    };
    for (d, got) in DIRECTIONS.iter().zip(&exp.report.directions) {
        assert_eq!(got.direction, *d);
        let (q, g) = (embedded(d.query), embedded(d.gallery));
        let ranks: Vec<usize> = (0..q.len())
            .map(|i| {
                let dist = |j: usize| -> f64 { q[i].iter().zip(&g[j]).map(|(a, b)| (a - b) * (a - b)).sum() };
                let mut order: Vec<usize> = (0..g.len()).collect();
                order.sort_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap().then((a == i).cmp(&(b == i))));
                1 + order.iter().position(|&j| j == i).unwrap()
            })
            .collect();
        assert_eq!(got.metrics, metrics_from_ranks(&ranks).unwrap(), "{}", d.label());
        let m = &got.metrics;
        assert!(m.recall_at_1 <= m.recall_at_5 && m.recall_at_5 <= m.recall_at_10);
    }
}

#[test]
fn hand_computed_metrics() {
    let m = metrics_from_ranks(&[1, 1, 1, 1]).unwrap();
    assert_eq!((m.recall_at_1, m.median_rank, m.mean_rank), (100.0, 1.0, 1.0));
    let m = metrics_from_ranks(&(1..=10).collect::<Vec<_>>()).unwrap();
    assert_eq!(
        (m.recall_at_1, m.recall_at_5, m.recall_at_10, m.median_rank, m.mean_rank),
        (10.0, 50.0, 100.0, 5.5, 5.5)
    );
    let m = metrics_from_ranks(&[7]).unwrap();
    assert_eq!((m.recall_at_5, m.recall_at_10, m.median_rank), (0.0, 100.0, 7.0));
}

proptest! {
    #[test]
    fn splits_partition_without_leakage(n in 1usize..80, seed: u64, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let ratios = [lo, hi - lo, 1.0 - hi];
        let data = synth_dataset(&SynthConfig { n, latent_dim: 1, audio_dim: 2, sheet_dim: 2, lyrics_dim: 1, noise_sigma: 0.1, seed }).unwrap();
        let (tr, va, te) = split(&data, ratios, seed).unwrap();
        prop_assert_eq!(tr.len() + va.len() + te.len(), n);
        let mut ids: Vec<&String> = tr.ids().iter().chain(va.ids()).chain(te.ids()).collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
        let again = split(&data, ratios, seed).unwrap();
        prop_assert_eq!(&again.0, &tr);
    }
}
