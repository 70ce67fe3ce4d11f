//! Cross-entropy, Blurry and Piecewise-zero losses over the probability of
//! the labelled class, their derivatives, and the chain rule to logits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{softmax, Matrix, Rng};

/// Which loss to train against. `gamma` and `cutoff` live on their variants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec {
    /// `-ln p`
    #[serde(rename = "ce")]
    CrossEntropy,
    /// `-p^gamma ln p`
    #[serde(rename = "bl")]
    Blurry { gamma: f64 },
    /// `0` for `p <= cutoff`, `-ln p` above it.
    #[serde(rename = "pz")]
    PiecewiseZero { cutoff: f64 },
}

/// Lower clamp applied to probabilities before any log or power.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClampPolicy {
    pub epsilon: f64,
}

impl Default for ClampPolicy {
    fn default() -> Self {
        ClampPolicy { epsilon: 1e-12 }
    }
}

impl ClampPolicy {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1e-6) {
            return Err(Error::domain(format!(
                "clamp epsilon {epsilon} outside (0, 1e-6)"
            )));
        }
        Ok(ClampPolicy { epsilon })
    }

    fn apply(&self, p: f64) -> f64 {
        p.clamp(self.epsilon, 1.0)
    }
}

/// Probabilities may exceed [0, 1] by this much from rounding.
const DOMAIN_SLACK: f64 = 1e-9;

fn check_probability(p: f64) -> Result<()> {
    if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&p) {
        return Err(Error::domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

impl LossSpec {
    pub fn blurry(gamma: f64) -> Result<Self> {
        let spec = LossSpec::Blurry { gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn piecewise_zero(cutoff: f64) -> Result<Self> {
        let spec = LossSpec::PiecewiseZero { cutoff };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::CrossEntropy => Ok(()),
            LossSpec::Blurry { gamma } if gamma >= 0.0 && gamma.is_finite() => Ok(()),
            LossSpec::Blurry { gamma } => {
                Err(Error::domain(format!("BL gamma {gamma} must be >= 0")))
            }
            LossSpec::PiecewiseZero { cutoff } if (0.0..=1.0).contains(&cutoff) => Ok(()),
            LossSpec::PiecewiseZero { cutoff } => Err(Error::domain(format!(
                "PZ cutoff {cutoff} must lie in [0, 1]"
            ))),
        }
    }

    /// Short name used in logs and CSV output.
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::CrossEntropy => "CE",
            LossSpec::Blurry { .. } => "BL",
            LossSpec::PiecewiseZero { .. } => "PZ",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            LossSpec::Blurry { gamma } => Some(gamma),
            _ => None,
        }
    }

    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            LossSpec::PiecewiseZero { cutoff } => Some(cutoff),
            _ => None,
        }
    }

    pub fn value(&self, p: f64) -> Result<f64> {
        self.value_with(p, ClampPolicy::default())
    }

    pub fn value_with(&self, p: f64, clamp: ClampPolicy) -> Result<f64> {
        check_probability(p)?;
        let p = clamp.apply(p);
        let v = match *self {
            LossSpec::CrossEntropy => -p.ln(),
            LossSpec::Blurry { gamma } => -p.powf(gamma) * p.ln(),
            LossSpec::PiecewiseZero { cutoff } if p <= cutoff => 0.0,
            LossSpec::PiecewiseZero { .. } => -p.ln(),
        };
        // -0.0 at p = 1 reads badly in output
        Ok(v.max(0.0))
    }

    /// dL/dp. The PZ derivative at exactly `p == cutoff` is taken as 0.
    pub fn grad_p(&self, p: f64) -> Result<f64> {
        self.grad_p_with(p, ClampPolicy::default())
    }

    pub fn grad_p_with(&self, p: f64, clamp: ClampPolicy) -> Result<f64> {
        check_probability(p)?;
        let p = clamp.apply(p);
        Ok(match *self {
            LossSpec::CrossEntropy => -1.0 / p,
            LossSpec::Blurry { gamma } => -p.powf(gamma - 1.0) * (gamma * p.ln() + 1.0),
            LossSpec::PiecewiseZero { cutoff } if p <= cutoff => 0.0,
            LossSpec::PiecewiseZero { .. } => -1.0 / p,
        })
    }

    /// dL/d(ln p), i.e. `p · dL/dp`, evaluated without dividing by p.
    ///
    /// This keeps the logit gradient exact when p underflows: for CE it is
    /// identically -1, so the logit gradient is exactly `probs - onehot`.
    pub fn grad_log_p(&self, p: f64) -> Result<f64> {
        check_probability(p)?;
        let clamp = ClampPolicy::default();
        Ok(match *self {
            LossSpec::CrossEntropy => -1.0,
            LossSpec::Blurry { gamma } => {
                let p = clamp.apply(p);
                -p.powf(gamma) * (gamma * p.ln() + 1.0)
            }
            LossSpec::PiecewiseZero { cutoff } if clamp.apply(p) <= cutoff => 0.0,
            LossSpec::PiecewiseZero { .. } => -1.0,
        })
    }

    /// Gradient of `loss(softmax(z)[label])` with respect to the logits z,
    /// given `probs = softmax(z)`:
    /// `dL/dz_j = dL/d(ln p_label) · (δ(label, j) − p_j)`.
    pub fn grad_logits(&self, probs: &[f64], label: usize) -> Result<Vec<f64>> {
        if label >= probs.len() {
            return Err(Error::domain(format!(
                "label {label} out of range for {} classes",
                probs.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("probabilities sum to {sum}, not 1")));
        }
        let scale = self.grad_log_p(probs[label])?;
        Ok(probs
            .iter()
            .enumerate()
            .map(|(j, &pj)| {
                let delta = if j == label { 1.0 } else { 0.0 };
                let g = scale * (delta - pj);
                // avoid -0.0 in the zero branches
                if g == 0.0 {
                    0.0
                } else {
                    g
                }
            })
            .collect())
    }

    /// Mean loss over a batch and the per-row logit gradients of that mean.
    pub fn batch_loss_and_grad(&self, probs: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
        if probs.rows() != labels.len() || labels.is_empty() {
            return Err(Error::config(format!(
                "{} probability rows for {} labels",
                probs.rows(),
                labels.len()
            )));
        }
        let n = labels.len() as f64;
        let mut total = 0.0;
        let mut grads = Matrix::zeros(probs.rows(), probs.cols());
        for (r, &label) in labels.iter().enumerate() {
            let row = probs.row(r);
            if label >= row.len() {
                return Err(Error::domain(format!("label {label} out of range")));
            }
            total += self.value(row[label])?;
            let scale = self.grad_log_p(row[label])? / n;
            let out = grads.row_mut(r);
            for (j, (o, &pj)) in out.iter_mut().zip(row).enumerate() {
                let delta = if j == label { 1.0 } else { 0.0 };
                *o = scale * (delta - pj);
            }
        }
        Ok((total / n, grads))
    }
}

/// Probability below which the BL gradient turns positive: `e^{-1/gamma}`.
pub fn bl_sign_flip_point(gamma: f64) -> Result<f64> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(Error::domain(format!(
            "gamma {gamma} has no sign flip (gamma must be > 0)"
        )));
    }
    Ok((-1.0 / gamma).exp())
}

/// Central-difference gradient of `loss(probs_fn(logits)[label])` per logit.
pub fn finite_diff_oracle<F>(
    spec: &LossSpec,
    probs_fn: F,
    logits: &[f64],
    label: usize,
    h: f64,
) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::domain(format!("step {h} outside [1e-8, 1e-4]")));
    }
    let mut z = logits.to_vec();
    let mut grad = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let orig = z[i];
        z[i] = orig + h;
        let up = spec.value(probs_fn(&z)[label])?;
        z[i] = orig - h;
        let down = spec.value(probs_fn(&z)[label])?;
        z[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `max_i |a_i - b_i| / max(‖a‖∞, ‖b‖∞)`; 0 when both vectors are zero.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let diff = a
        .iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / scale
}

/// Outcome of comparing analytic logit gradients with finite differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub loss: LossSpec,
    pub trials: usize,
    pub checked: usize,
    /// PZ cases whose labelled probability sat within `PZ_EXCLUSION` of c.
    pub excluded: usize,
    pub max_relative_error: f64,
}

pub const PZ_EXCLUSION: f64 = 1e-3;

/// Random-case gradient check over `num_classes`-way logits drawn from
/// N(0, 2²). The case stream depends only on `seed`, not on the loss.
pub fn grad_check(
    spec: &LossSpec,
    trials: usize,
    num_classes: usize,
    h: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = Rng::new(seed);
    let mut report = GradCheckReport {
        loss: *spec,
        trials,
        checked: 0,
        excluded: 0,
        max_relative_error: 0.0,
    };
    for _ in 0..trials {
        let logits: Vec<f64> = (0..num_classes).map(|_| 2.0 * rng.normal()).collect();
        let label = rng.below(num_classes);
        let probs = softmax(&logits);
        if let Some(c) = spec.cutoff() {
            if (probs[label] - c).abs() < PZ_EXCLUSION {
                report.excluded += 1;
                continue;
            }
        }
        let analytic = spec.grad_logits(&probs, label)?;
        let numeric = finite_diff_oracle(spec, softmax, &logits, label, h)?;
        report.max_relative_error = report
            .max_relative_error
            .max(max_relative_error(&analytic, &numeric));
        report.checked += 1;
    }
    Ok(report)
}
