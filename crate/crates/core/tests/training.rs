mod common;

use common::gradcheck::{random_batch, small_config};
use cvsc::dataset::{generate_synthetic_corpus, Corpus};
use cvsc::encoding::encode_ids;
use cvsc::lexer::TokenTable;
use cvsc::nn::{train, Model, ModelConfig, NnError, TrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tiny_corpus() -> Corpus {
    generate_synthetic_corpus(4, 11, &TokenTable::default())
}

fn experiment_config() -> ModelConfig {
    ModelConfig {
        input_len: 160,
        ..small_config()
    }
}

fn quick(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn batch_results_match_single_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let model = Model::<f32>::init(small_config(), 0, 2).unwrap();
    let (inputs, _) = random_batch(&mut rng, 6, 20);
    let together = model.forward(&inputs).unwrap();
    for (x, row) in inputs.iter().zip(&together) {
        let alone = model.forward(std::slice::from_ref(x)).unwrap()[0];
        assert_eq!(alone.map(f32::to_bits), row.map(f32::to_bits));
    }
}

#[test]
fn duplicated_sample_leaves_mean_gradient_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let model = Model::<f32>::init(small_config(), 0, 4).unwrap().cast::<f64>();
    let (inputs, targets) = random_batch(&mut rng, 1, 20);
    let doubled = [inputs[0].clone(), inputs[0].clone()];
    let (once, loss_once) = model.backward(&inputs, &targets).unwrap();
    let (twice, loss_twice) = model.backward(&doubled, &[targets[0]; 2]).unwrap();
    assert!((loss_once - loss_twice).abs() < 1e-12);
    for (a, b) in once.tensors().iter().zip(twice.tensors()) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn zero_epochs_change_nothing() {
    let corpus = tiny_corpus();
    let model = Model::<f32>::init(experiment_config(), corpus.table_fingerprint, 1).unwrap();
    let (after, history) = train(model.clone(), &corpus, &quick(0, 1)).unwrap();
    assert!(history.is_empty());
    assert_eq!(after, model);
}

#[test]
fn training_lowers_the_loss() {
    let corpus = tiny_corpus();
    let model = Model::<f32>::init(experiment_config(), corpus.table_fingerprint, 1).unwrap();
    let (_, history) = train(model, &corpus, &quick(30, 1)).unwrap();
    let (first, last) = (history[0].mean_loss, history.last().unwrap().mean_loss);
    assert!(last < 0.5 * first, "loss went from {first} to {last}");
}

#[test]
fn seeds_decide_the_result() {
    let corpus = tiny_corpus();
    let run = |init: u64, shuffle: u64| {
        let model = Model::<f32>::init(experiment_config(), corpus.table_fingerprint, init).unwrap();
        train(model, &corpus, &quick(2, shuffle)).unwrap().0
    };
    let base = run(1, 1);
    assert_eq!(base.to_bytes(), run(1, 1).to_bytes());
    assert_ne!(base, run(2, 1));
    assert_ne!(base, run(1, 2));
}

#[test]
fn corpus_from_another_table_is_refused() {
    let corpus = tiny_corpus();
    let model = Model::<f32>::init(experiment_config(), corpus.table_fingerprint ^ 1, 1).unwrap();
    assert!(matches!(
        train(model, &corpus, &quick(1, 1)),
        Err(NnError::TableMismatch { .. })
    ));
}

#[test]
fn bad_training_settings_are_refused() {
    let corpus = tiny_corpus();
    let model = Model::<f32>::init(experiment_config(), corpus.table_fingerprint, 1).unwrap();
    for tc in [
        TrainConfig { batch_size: 0, ..quick(1, 1) },
        TrainConfig { learning_rate: 0.0, ..quick(1, 1) },
        TrainConfig { beta2: 1.0, ..quick(1, 1) },
    ] {
        assert!(matches!(train(model.clone(), &corpus, &tc), Err(NnError::InvalidConfig(_))));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_form_a_distribution(ids in prop::collection::vec(0u8..=90, 0..40), seed in 0u64..1000) {
        let model = Model::<f32>::init(small_config(), 0, seed).unwrap();
        let p = model.predict(&encode_ids(&ids, 20)).unwrap();
        prop_assert!((p.probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);
        prop_assert!(p.probs.iter().all(|&q| (0.0..=1.0).contains(&q)));
        prop_assert!(p.confidence >= 0.2 - 1e-6);
        prop_assert_eq!(p.confidence, p.probs[p.label.index()]);
    }

    #[test]
    fn trailing_padding_does_not_change_predictions(ids in prop::collection::vec(1u8..=90, 1..20)) {
        // Explicit PAD ids after the function encode exactly like implicit padding.
        let model = Model::<f32>::init(small_config(), 0, 9).unwrap();
        let mut padded = ids.clone();
        padded.resize(20, 0);
        let a = model.predict(&encode_ids(&ids, 20)).unwrap();
        let b = model.predict(&encode_ids(&padded, 20)).unwrap();
        prop_assert_eq!(a.probs.map(f64::to_bits), b.probs.map(f64::to_bits));
    }
}
