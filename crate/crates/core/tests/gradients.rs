mod common;

use common::gradcheck::{self, MAX_REL_ERR};

const TENSORS: [&str; 8] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "dense1.weight",
    "dense1.bias",
    "dense2.weight",
    "dense2.bias",
];

#[test]
fn layers_match_finite_differences() {
    for seed in 0..5 {
        assert!(gradcheck::conv_layer(seed) < MAX_REL_ERR, "conv, seed {seed}");
        assert!(gradcheck::dense_layer(seed) < MAX_REL_ERR, "dense, seed {seed}");
        assert!(gradcheck::pool_layer(seed) < MAX_REL_ERR, "pool, seed {seed}");
        assert!(gradcheck::relu_layer(seed) < MAX_REL_ERR, "relu, seed {seed}");
    }
}

#[test]
fn network_matches_finite_differences() {
    for seed in 0..3 {
        let worst = gradcheck::whole_model(seed);
        for (name, err) in TENSORS.iter().zip(worst) {
            assert!(err < MAX_REL_ERR, "{name}: relative error {err:e}, seed {seed}");
        }
    }
}
