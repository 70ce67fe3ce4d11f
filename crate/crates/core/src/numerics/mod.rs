//! Dense matrices, seeded randomness, He initialization and softmax.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::Rng;

/// Softmax with max-subtraction.
///
/// Any logit more than ~745 below the maximum underflows to a probability of
/// exactly 0; the loss layer clamps before taking logarithms.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Row-wise softmax of a logits matrix.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut probs = logits.clone();
    for r in 0..probs.rows() {
        softmax_in_place(probs.row_mut(r));
    }
    probs
}

/// Kaiming He normal initialization: a `fan_in × fan_out` matrix of draws
/// from N(0, 2 / fan_in).
pub fn he_normal_init(rng: &mut Rng, fan_in: usize, fan_out: usize) -> Matrix {
    assert!(
        fan_in >= 1 && fan_out >= 1,
        "fan_in and fan_out must be positive"
    );
    let std = (2.0 / fan_in as f64).sqrt();
    let values = (0..fan_in * fan_out).map(|_| std * rng.normal()).collect();
    Matrix::from_vec(fan_in, fan_out, values).expect("normal draws are finite")
}

/// Draw one standard normal variate.
pub fn normal_sample(rng: &mut Rng) -> f64 {
    rng.normal()
}
