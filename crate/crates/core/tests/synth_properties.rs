use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsl_core::experiment::{evaluate_classifiers, evaluate_gcn, fixture_hidden, EvalTask, GraphVariant};
use zsl_core::linalg::{row_l2_normalize, DenseMatrix};
use zsl_core::synth::{generate_world, write_task, WorldConfig};
use zsl_core::train::TrainConfig;
use zsl_core::zeroshot::Setting;

#[test]
fn ground_truth_is_a_ceiling_for_trained_models() {
    let task = generate_world(&WorldConfig::default()).unwrap();
    let (features, labels) = task.test_set();
    let oracle = evaluate_classifiers(&features, &labels, &task.gt_classifiers.matrix, &task.seen_mask, Setting::UnseenOnly, &[1]).unwrap();
    let (_, trained) = evaluate_gcn(&EvalTask::from(&task), GraphVariant::Original, &fixture_hidden(6).unwrap(), &TrainConfig::default(), &[1]).unwrap();
    assert!(oracle.hits[0] + 0.02 >= trained.hits[0], "oracle {} trained {}", oracle.hits[0], trained.hits[0]);
}

#[test]
fn random_classifiers_score_near_chance() {
    let task = generate_world(&WorldConfig { images_per_class: 60, ..WorldConfig::default() }).unwrap();
    let (features, labels) = task.test_set();
    assert!(features.rows() >= 500);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (n, d) = task.gt_classifiers.matrix.shape();
    let random = DenseMatrix::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let r = evaluate_classifiers(&features, &labels, &row_l2_normalize(&random), &task.seen_mask, Setting::UnseenOnly, &[1]).unwrap();
    let chance = 1.0 / task.unseen().len() as f64;
    assert!(r.hits[0] <= 3.0 * chance && r.hits[0] >= chance / 3.0, "hit@1 {} chance {chance}", r.hits[0]);
}

#[test]
fn generation_and_files_are_bit_deterministic() {
    let cfg = WorldConfig { num_classes: 25, images_per_class: 4, extra_edges: 8, ..WorldConfig::default() };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = write_task(a.path(), &generate_world(&cfg).unwrap()).unwrap();
    let pb = write_task(b.path(), &generate_world(&cfg).unwrap()).unwrap();
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn split_invariants_hold_across_seeds() {
    for seed in 0..20 {
        let t = generate_world(&WorldConfig { seed, num_classes: 30, images_per_class: 2, extra_edges: 5, ..WorldConfig::default() }).unwrap();
        assert_eq!(t.unseen().len(), 5);
        assert_eq!(t.seen().len() + t.unseen().len(), 30);
        let (_, labels) = t.test_set();
        for c in t.unseen() {
            assert_eq!(labels.iter().filter(|&&l| l == c).count(), 2);
        }
        for i in 0..30 {
            let norm: f64 = t.gt_classifiers.matrix.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }
}
