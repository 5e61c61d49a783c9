use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ugaar_core::data::Modality;
use ugaar_core::discriminator::{prob, relevance, DiscriminatorParams};
use ugaar_core::generator::{
    distribution_head, embed, pair_probability, sample_pair, teacher_student_loss, GeneratorParams, PairDistribution,
};
use ugaar_core::numkit::prob::entropy;
use ugaar_core::numkit::{kl_divergence, mlp_forward, softmax, squared_distance, Activation, DenseMatrix, MlpParams};

fn finite(range: f64) -> impl Strategy<Value = f64> {
    -range..range
}

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, len).prop_filter_map("positive mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|v| v / s).collect())
    })
}

proptest! {
    #[test]
    fn softmax_normalizes_and_ignores_shifts(logits in prop::collection::vec(finite(50.0), 1..20), shift in finite(100.0)) {
        let p = softmax(&logits).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        for (a, b) in p.iter().zip(softmax(&shifted).unwrap()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn kl_is_non_negative((p, q) in (1usize..12).prop_flat_map(|n| (distribution(n), distribution(n)))) {
        prop_assert!(kl_divergence(&p, &q).unwrap() >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).unwrap().abs() < 1e-9);
    }

    #[test]
    fn pair_probability_is_translation_invariant(
        seed: u64,
        m in 1usize..10,
        offset in prop::collection::vec(finite(5.0), 3),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let query: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let joints = DenseMatrix::new(m, 3, (0..3 * m).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let candidates: Vec<(usize, usize)> = (0..m).map(|i| (i, i)).collect();
        let base = pair_probability(&query, &candidates, &joints).unwrap();

        let moved_q: Vec<f64> = query.iter().zip(&offset).map(|(a, b)| a + b).collect();
        let mut moved = joints.clone();
        for r in 0..m {
            for (v, o) in moved.row_mut(r).iter_mut().zip(&offset) {
                *v += o;
            }
        }
        let shifted = pair_probability(&moved_q, &candidates, &moved).unwrap();
        for (a, b) in base.probabilities.iter().zip(&shifted.probabilities) {
            prop_assert!((a - b).abs() < 1e-9);
        }

        let argmax = (0..m).max_by(|&a, &b| base.probabilities[a].total_cmp(&base.probabilities[b])).unwrap();
        let nearest = (0..m)
            .min_by(|&a, &b| squared_distance(&query, joints.row(a)).total_cmp(&squared_distance(&query, joints.row(b))))
            .unwrap();
        prop_assert!(
            argmax == nearest
                || (squared_distance(&query, joints.row(argmax)) - squared_distance(&query, joints.row(nearest))).abs() < 1e-12
        );
    }

    #[test]
    fn teacher_student_loss_is_non_negative(seed: u64, scale in 0.1f64..5.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = GeneratorParams::init([4, 3, 2], 5, 6, 1.0, &mut rng).unwrap();
        let x: Vec<f64> = (0..4).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..3).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..2).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        prop_assert!(teacher_student_loss(&params, &x, &y, &z).unwrap() >= 0.0);
    }

    #[test]
    fn discriminator_output_lies_in_half_open_band(seed: u64, spread in 0.1f64..20.0) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let disc = DiscriminatorParams::init(3, 6, 4, 1.0, &mut rng).unwrap();
        let mut v = |n: usize| -> Vec<f64> { (0..n).map(|_| spread * rng.random_range(-1.0..1.0)).collect() };
        let (q, pt, pg) = (v(3), v(6), v(6));
        let phi = relevance(&disc, &q, &pt, &pg).unwrap();
        prop_assert!(phi >= 0.0);
        let d = prob(phi);
        prop_assert!((0.5..1.0).contains(&d));
    }
}

#[test]
fn entropy_rises_with_temperature() {
    let e = [1.5, -0.3, 0.7, 0.0, -2.0];
    let h: Vec<f64> = [0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&t| entropy(&distribution_head(&e, t).unwrap()))
        .collect();
    for w in h.windows(2) {
        assert!(w[0] < w[1], "{h:?}");
    }
    assert!(h[3] < (e.len() as f64).ln());
}

#[test]
fn sampling_frequencies_follow_probabilities() {
    let dist = PairDistribution {
        candidates: vec![(0, 0), (1, 1)],
        probabilities: vec![2.0 / 3.0, 1.0 / 3.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let draws = 100_000;
    let first = (0..draws)
        .filter(|_| sample_pair(&dist, &mut rng).unwrap().index == 0)
        .count();
    let freq = first as f64 / draws as f64;
    assert!((freq - 2.0 / 3.0).abs() < 0.01, "{freq}");

    let near_certain = PairDistribution {
        candidates: vec![(0, 0), (1, 1)],
        probabilities: vec![1.0 - 1e-15, 1e-15],
    };
    for _ in 0..1000 {
        assert_eq!(sample_pair(&near_certain, &mut rng).unwrap().index, 0);
    }
}

#[test]
fn forward_passes_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let mlp = MlpParams::init(&[7, 9, 4], Activation::Identity, &mut rng).unwrap();
    let x = [0.3, -1.2, 2.2, 0.0, 5.0, -0.01, 1.0];
    assert_eq!(mlp_forward(&mlp, &x).unwrap(), mlp_forward(&mlp, &x).unwrap());
    let gen = GeneratorParams::init([7, 3, 2], 4, 5, 1.0, &mut rng).unwrap();
    let a = embed(&gen, &x, Modality::Audio).unwrap();
    assert_eq!(a, embed(&gen.clone(), &x, Modality::Audio).unwrap());
}
