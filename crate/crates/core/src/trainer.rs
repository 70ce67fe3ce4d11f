//! Plain minibatch SGD with the recording schedule: once at initialization,
//! after every batch of the first epoch, then after every later epoch.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::diagnostics::{evaluate, ClassMetrics};
use crate::error::{Error, Result};
use crate::losses::LossSpec;
use crate::model::{Gradients, MlpModel, ModelConfig};
use crate::numerics::Rng;

/// ChaCha stream reserved for minibatch order.
const SHUFFLE_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub loss: LossSpec,
    pub shuffle_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 32,
            learning_rate: 0.01,
            epochs: 20,
            loss: LossSpec::CrossEntropy,
            shuffle_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_len: usize) -> Result<()> {
        if self.batch_size == 0 || self.batch_size > train_len {
            return Err(Error::config(format!(
                "batch size {} must lie in 1..={train_len}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::config("need at least one epoch"));
        }
        self.loss.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Init,
    Batch,
    Epoch,
}

impl StepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StepKind::Init => "init",
            StepKind::Batch => "batch",
            StepKind::Epoch => "epoch",
        }
    }
}

/// Metrics at one recording point, evaluated on the validation set.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub step_kind: StepKind,
    /// Zero-based epoch the record belongs to (the epoch just finished for
    /// `Epoch` records).
    pub epoch: usize,
    pub batch: Option<usize>,
    pub fractional_epoch: f64,
    pub metrics: ClassMetrics,
    /// Mean training loss of the batch just applied; `None` at init.
    pub batch_loss: Option<f64>,
    pub loss: LossSpec,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunMetadata {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_fingerprint: String,
    pub val_fingerprint: String,
    pub batches_per_epoch: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunLog {
    pub metadata: RunMetadata,
    pub records: Vec<MetricsRecord>,
}

/// Number of records `train` produces.
pub fn expected_record_count(batches_per_epoch: usize, epochs: usize) -> usize {
    1 + batches_per_epoch + epochs.saturating_sub(1)
}

/// Seeded permutation of `0..n` cut into consecutive chunks; the last
/// chunk may be short.
pub fn make_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    assert!(batch_size > 0, "batch size must be positive");
    rng.permutation(n)
        .chunks(batch_size)
        .map(<[usize]>::to_vec)
        .collect()
}

/// `θ ← θ − lr·∇θ` for every parameter.
pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, lr: f64) -> Result<()> {
    if grads.layers.len() != model.layers().len()
        || grads
            .layers
            .iter()
            .zip(model.layers())
            .any(|(g, l)| g.weights.shape() != l.weights.shape() || g.bias.len() != l.bias.len())
    {
        return Err(Error::config(
            "gradient shapes do not match model parameters",
        ));
    }
    for (layer, grad) in model.layers_mut().iter_mut().zip(&grads.layers) {
        for (w, g) in layer
            .weights
            .as_mut_slice()
            .iter_mut()
            .zip(grad.weights.as_slice())
        {
            *w -= lr * g;
        }
        for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
            *b -= lr * g;
        }
        let finite = layer
            .weights
            .as_slice()
            .iter()
            .chain(&layer.bias)
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::numeric(
                "sgd step",
                "parameter update produced a non-finite value",
            ));
        }
    }
    Ok(())
}

fn step_name(epoch: usize, batch: usize) -> String {
    format!("epoch {epoch} batch {batch}")
}

fn rename_step(err: Error, epoch: usize, batch: usize) -> Error {
    match err {
        Error::Numeric { step, detail } => Error::Numeric {
            step: step_name(epoch, batch),
            detail: format!("{step}: {detail}"),
        },
        other => other,
    }
}

/// One forward/backward/update on the given sample indices; returns the
/// mean batch loss.
pub fn train_batch(
    model: &mut MlpModel,
    train_set: &Dataset,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    let x = train_set.features().select_rows(indices);
    let labels: Vec<usize> = indices.iter().map(|&i| train_set.labels()[i]).collect();
    let trace = model.forward(&x)?;
    let (loss, grad_logits) = cfg.loss.batch_loss_and_grad(&trace.probs, &labels)?;
    if !loss.is_finite() {
        return Err(Error::numeric("batch", format!("loss evaluated to {loss}")));
    }
    let grads = model.backward(&trace, &grad_logits)?;
    sgd_step(model, &grads, cfg.learning_rate)?;
    Ok(loss)
}

pub fn train(
    model: &mut MlpModel,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<RunLog> {
    train_with(model, train_set, val_set, cfg, |_| Ok(()))
}

/// Like [`train`], calling `on_record` as soon as each record exists so
/// callers can stream output and keep everything up to a failure.
pub fn train_with<F>(
    model: &mut MlpModel,
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
    mut on_record: F,
) -> Result<RunLog>
where
    F: FnMut(&MetricsRecord) -> Result<()>,
{
    cfg.validate(train_set.len())?;
    if train_set.input_dim() != val_set.input_dim()
        || train_set.num_classes() != val_set.num_classes()
    {
        return Err(Error::config(
            "train and validation sets disagree on shape or classes",
        ));
    }
    if model.config().input_dim != train_set.input_dim()
        || model.num_classes() != train_set.num_classes()
    {
        return Err(Error::config("model does not match dataset shape"));
    }

    let n = train_set.len();
    let batches_per_epoch = n.div_ceil(cfg.batch_size);
    let mut log = RunLog {
        metadata: RunMetadata {
            model: model.config().clone(),
            train: cfg.clone(),
            train_fingerprint: train_set.fingerprint(),
            val_fingerprint: val_set.fingerprint(),
            batches_per_epoch,
        },
        records: Vec::with_capacity(expected_record_count(batches_per_epoch, cfg.epochs)),
    };
    let seed = model.config().seed;
    let mut push = |log: &mut RunLog, record: MetricsRecord| -> Result<()> {
        on_record(&record)?;
        log.records.push(record);
        Ok(())
    };

    let init = evaluate(model, val_set)?;
    push(
        &mut log,
        MetricsRecord {
            step_kind: StepKind::Init,
            epoch: 0,
            batch: None,
            fractional_epoch: 0.0,
            metrics: init,
            batch_loss: None,
            loss: cfg.loss,
            seed,
        },
    )?;

    let mut rng = Rng::with_stream(cfg.shuffle_seed, SHUFFLE_STREAM);
    for epoch in 0..cfg.epochs {
        let batches = make_batches(n, cfg.batch_size, &mut rng);
        let mut last_loss = 0.0;
        for (b, indices) in batches.iter().enumerate() {
            last_loss = train_batch(model, train_set, indices, cfg)
                .map_err(|e| rename_step(e, epoch, b))?;
            if epoch == 0 {
                let metrics = evaluate(model, val_set).map_err(|e| rename_step(e, epoch, b))?;
                push(
                    &mut log,
                    MetricsRecord {
                        step_kind: StepKind::Batch,
                        epoch,
                        batch: Some(b),
                        fractional_epoch: (b + 1) as f64 / batches_per_epoch as f64,
                        metrics,
                        batch_loss: Some(last_loss),
                        loss: cfg.loss,
                        seed,
                    },
                )?;
            }
        }
        if epoch > 0 {
            let metrics = evaluate(model, val_set)
                .map_err(|e| rename_step(e, epoch, batches_per_epoch - 1))?;
            push(
                &mut log,
                MetricsRecord {
                    step_kind: StepKind::Epoch,
                    epoch,
                    batch: None,
                    fractional_epoch: (epoch + 1) as f64,
                    metrics,
                    batch_loss: Some(last_loss),
                    loss: cfg.loss,
                    seed,
                },
            )?;
        }
    }
    Ok(log)
}
