mod support;

use support::grad;

const SEEDS: u64 = 100;

fn worst(check: fn(u64) -> stemo::Result<f64>) -> (u64, f64) {
    (0..SEEDS)
        .map(|s| (s, check(s).unwrap()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

#[test]
fn linear_layer_and_input_gradients() {
    let (seed, err) = worst(grad::linear);
    assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
}

#[test]
fn gru_cell_gradients() {
    let (seed, err) = worst(grad::gru);
    assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
}

#[test]
fn mgcn_gradients() {
    let (seed, err) = worst(grad::mgcn);
    assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
}

#[test]
fn q_network_gradients() {
    let (seed, err) = worst(grad::q_mlp);
    assert!(err < 1e-4, "seed {seed}: relative error {err:e}");
}

#[test]
fn predictor_mae_gradients() {
    let (seed, err) = worst(grad::end_to_end);
    assert!(err < 1e-3, "seed {seed}: relative error {err:e}");
}
