//! Central finite-difference gradient oracle, shared with the acceptance harness.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swift_core::model::{backward, forward, SwiftModel};

pub const STEP: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, 1e-8)`
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Replaces every parameter with a random value; affine scales stay near 1.
pub fn randomize(model: &mut SwiftModel, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in model.params_mut().tensors_mut() {
        let gamma = t.name == "norm.gamma";
        for v in t.data.iter_mut() {
            *v = if gamma {
                1.0 + rng.random_range(-0.3..0.3)
            } else {
                rng.random_range(-0.5..0.5)
            };
        }
    }
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0))
}

fn weighted_output(model: &SwiftModel, x: &Array2<f64>, upstream: &Array2<f64>) -> f64 {
    let (y, _) = forward(x.view(), model).expect("forward");
    (&y * upstream).sum()
}

/// Worst relative error per tensor between the analytic gradient of
/// `Σ upstream ⊙ forward(x)` and central differences.
pub fn gradient_errors(model: &SwiftModel, x: &Array2<f64>, upstream: &Array2<f64>) -> Vec<(String, f64)> {
    let (_, cache) = forward(x.view(), model).expect("forward");
    let grads = backward(cache, model, upstream.view()).expect("backward");
    let analytic: Vec<(String, Vec<f64>)> = grads.tensors().into_iter().map(|t| (t.name, t.data.to_vec())).collect();

    let mut probe = model.clone();
    let mut out = Vec::new();
    for (ti, (name, values)) in analytic.iter().enumerate() {
        let mut worst = 0.0f64;
        for (i, &a) in values.iter().enumerate() {
            let orig = probe.params.tensors()[ti].data[i];
            probe.params_mut().tensors_mut()[ti].data[i] = orig + STEP;
            let plus = weighted_output(&probe, x, upstream);
            probe.params_mut().tensors_mut()[ti].data[i] = orig - STEP;
            let minus = weighted_output(&probe, x, upstream);
            probe.params_mut().tensors_mut()[ti].data[i] = orig;
            worst = worst.max(rel_err(a, (plus - minus) / (2.0 * STEP)));
        }
        out.push((name.clone(), worst));
    }
    out
}
