use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use proto_curriculum::clustering::{fit_minibatch_kmeans, ClusterModel, KMeansConfig};
use proto_curriculum::data_io::{generate_synthetic, EmbeddingMatrix, SyntheticSpec};
use proto_curriculum::oracles::{oracle_alias_mass, oracle_effective_size, oracle_scores, oracle_softmax};
use proto_curriculum::prototypicality::score;
use proto_curriculum::sampler::{build_from_normalized, softmax_probs, Temperature};
use proto_curriculum::schedule::effective_size;

fn random_fixture(rng: &mut ChaCha8Rng) -> (EmbeddingMatrix, ClusterModel) {
    let n = rng.random_range(10..200);
    let dim = rng.random_range(1..12);
    let k = rng.random_range(2..=n.min(8));
    let data = (0..n * dim).map(|_| rng.random_range(-10.0f32..10.0)).collect();
    let m = EmbeddingMatrix::new(n, dim, data).unwrap();
    let model = fit_minibatch_kmeans(
        &m,
        &KMeansConfig {
            k,
            batch_size: 32,
            max_iters: 10,
            seed: rng.random(),
            ..KMeansConfig::default()
        },
    )
    .unwrap();
    (m, model)
}

#[test]
fn scores_match_scalar_reference_on_random_fixtures() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..100 {
        let (m, model) = random_fixture(&mut rng);
        let fast = score(&m, &model).unwrap();
        let slow = oracle_scores(&m, &model).unwrap();
        assert_eq!(fast.cluster_of(), slow.cluster_of());
        for (a, b) in fast.normalized().iter().zip(slow.normalized()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn scores_match_reference_on_five_blob_fixture() {
    let spec = SyntheticSpec {
        n_clusters: 5,
        samples_per_cluster: 10,
        dim: 5,
        separation: 10.0,
        spread: 1.0,
        seed: 3,
    };
    let m = generate_synthetic(&spec).unwrap();
    let model = ClusterModel::from_assignments(&m, spec.labels().iter().map(|&l| l as u32).collect(), 5).unwrap();
    let fast = score(&m, &model).unwrap();
    let slow = oracle_scores(&m, &model).unwrap();
    for (a, b) in fast.normalized().iter().zip(slow.normalized()) {
        assert!((a - b).abs() <= 1e-6);
    }
    for c in 0..5u32 {
        let members: Vec<f32> = (0..50)
            .filter(|&i| fast.cluster_of()[i] == c)
            .map(|i| fast.normalized()[i])
            .collect();
        assert_eq!(members.len(), 10);
        assert_eq!(members.iter().cloned().fold(1.0, f32::min), 0.0);
        assert_eq!(members.iter().cloned().fold(0.0, f32::max), 1.0);
    }
}

#[test]
fn softmax_and_effective_size_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let n = rng.random_range(2..1000);
        let d: Vec<f32> = (0..n).map(|_| rng.random::<f32>()).collect();
        for tau in [0.02, 0.07, 0.3, 1.0, 7.0] {
            let t = Temperature::Finite(tau);
            let fast = softmax_probs(&d, t).unwrap();
            let slow = oracle_softmax(&d, t);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 + 1e-9 * b, "{a} vs {b}");
            }
            let draws = rng.random_range(1..2 * n);
            let e = effective_size(&fast, draws).unwrap();
            let o = oracle_effective_size(&fast, draws);
            assert!((e - o).abs() <= 1e-9 * o.max(1.0), "{e} vs {o}");
        }
    }
}

#[test]
fn alias_mass_matches_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let n = rng.random_range(1..5000);
        let d: Vec<f32> = (0..n).map(|_| rng.random::<f32>()).collect();
        let dist = build_from_normalized(&d, Temperature::Finite(rng.random_range(0.01..2.0))).unwrap();
        for (m, p) in oracle_alias_mass(&dist).iter().zip(dist.probs()) {
            assert!((m - p).abs() <= 1e-12);
        }
    }
}
