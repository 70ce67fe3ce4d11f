//! Datasets: synthetic Gaussian blobs, IDX (MNIST-style) files, symmetric
//! label noise and seeded train/validation splits.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Synthetic,
    IdxFile,
    Derived,
}

/// Features plus integer labels in `0..num_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    provenance: Provenance,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::domain("dataset must contain at least one sample"));
        }
        if features.rows() != labels.len() {
            return Err(Error::config(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if num_classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::domain(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            provenance,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn input_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
            provenance: Provenance::Derived,
        }
    }

    /// SHA-256 over shape, labels and feature bits, as hex.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.features.rows() as u64).to_le_bytes());
        hasher.update((self.features.cols() as u64).to_le_bytes());
        hasher.update((self.num_classes as u64).to_le_bytes());
        for &y in &self.labels {
            hasher.update((y as u64).to_le_bytes());
        }
        for v in self.features.as_slice() {
            hasher.update(v.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Isotropic Gaussian class clusters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub num_classes: usize,
    pub samples_per_class: usize,
    pub input_dim: usize,
    /// Class means are drawn from N(0, center_scale²) per coordinate.
    pub center_scale: f64,
    /// Within-class standard deviation.
    pub noise_std: f64,
    pub seed: u64,
}

impl BlobSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 || self.samples_per_class == 0 || self.input_dim == 0 {
            return Err(Error::config(
                "blobs need >= 2 classes, >= 1 sample per class and a positive input_dim",
            ));
        }
        if !self.center_scale.is_finite()
            || self.center_scale <= 0.0
            || !self.noise_std.is_finite()
            || self.noise_std < 0.0
        {
            return Err(Error::config(
                "blobs need center_scale > 0 and noise_std >= 0",
            ));
        }
        Ok(())
    }
}

/// Class means first (class-major), then samples grouped by class.
pub fn generate_blobs(spec: &BlobSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let centers: Vec<Vec<f64>> = (0..spec.num_classes)
        .map(|_| {
            (0..spec.input_dim)
                .map(|_| spec.center_scale * rng.normal())
                .collect()
        })
        .collect();
    let n = spec.num_classes * spec.samples_per_class;
    let mut values = Vec::with_capacity(n * spec.input_dim);
    let mut labels = Vec::with_capacity(n);
    for (k, center) in centers.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            values.extend(center.iter().map(|c| c + spec.noise_std * rng.normal()));
            labels.push(k);
        }
    }
    Dataset::new(
        Matrix::from_vec(n, spec.input_dim, values)?,
        labels,
        spec.num_classes,
        Provenance::Synthetic,
    )
}

/// `n` standard-normal inputs with round-robin labels, for probing a model
/// before it has seen data.
pub fn gaussian_inputs(
    n: usize,
    input_dim: usize,
    num_classes: usize,
    seed: u64,
) -> Result<Dataset> {
    if n == 0 || input_dim == 0 {
        return Err(Error::config(
            "gaussian inputs need n >= 1 and input_dim >= 1",
        ));
    }
    let mut rng = Rng::new(seed);
    let values = (0..n * input_dim).map(|_| rng.normal()).collect();
    Dataset::new(
        Matrix::from_vec(n, input_dim, values)?,
        (0..n).map(|i| i % num_classes).collect(),
        num_classes,
        Provenance::Synthetic,
    )
}

fn read_be_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_be_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn check_header(bytes: &[u8], header_len: usize, magic: u32, what: &str) -> Result<()> {
    if bytes.len() < header_len {
        return Err(Error::format(format!(
            "{what}: truncated header, expected {header_len} bytes, got {}",
            bytes.len()
        )));
    }
    let observed = read_be_u32(bytes, 0);
    if observed != magic {
        return Err(Error::format(format!(
            "{what}: wrong magic 0x{observed:08x}, expected 0x{magic:08x}"
        )));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header_len: usize, expected: usize, what: &str) -> Result<()> {
    let actual = bytes.len() - header_len;
    if actual != expected {
        return Err(Error::format(format!(
            "{what}: expected {expected} payload bytes, got {actual}"
        )));
    }
    Ok(())
}

/// Raw IDX image container.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        check_header(bytes, 16, IDX_IMAGES_MAGIC, "idx images")?;
        let count = read_be_u32(bytes, 4) as usize;
        let rows = read_be_u32(bytes, 8) as usize;
        let cols = read_be_u32(bytes, 12) as usize;
        check_payload(bytes, 16, count * rows * cols, "idx images")?;
        Ok(IdxImages {
            count,
            rows,
            cols,
            pixels: bytes[16..].to_vec(),
        })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.pixels.len());
        for v in [
            IDX_IMAGES_MAGIC,
            self.count as u32,
            self.rows as u32,
            self.cols as u32,
        ] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(&self.pixels);
        out
    }

    /// One flattened image per row, pixels divided by 255.
    pub fn to_matrix(&self) -> Result<Matrix> {
        let values = self.pixels.iter().map(|&b| f64::from(b) / 255.0).collect();
        Matrix::from_vec(self.count, self.rows * self.cols, values)
    }
}

pub fn load_idx_images(bytes: &[u8]) -> Result<Matrix> {
    IdxImages::parse(bytes)?.to_matrix()
}

pub fn load_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_header(bytes, 8, IDX_LABELS_MAGIC, "idx labels")?;
    let count = read_be_u32(bytes, 4) as usize;
    check_payload(bytes, 8, count, "idx labels")?;
    Ok(bytes[8..].iter().map(|&b| usize::from(b)).collect())
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Pairs an image file with a label file. `num_classes` defaults to one
/// past the largest label.
pub fn dataset_from_idx(
    image_bytes: &[u8],
    label_bytes: &[u8],
    num_classes: Option<usize>,
) -> Result<Dataset> {
    let features = load_idx_images(image_bytes)?;
    let labels = load_idx_labels(label_bytes)?;
    if labels.len() != features.rows() {
        return Err(Error::format(format!(
            "{} images but {} labels",
            features.rows(),
            labels.len()
        )));
    }
    let k = num_classes.unwrap_or_else(|| labels.iter().max().map_or(2, |m| (m + 1).max(2)));
    Dataset::new(features, labels, k, Provenance::IdxFile)
}

/// Symmetric label noise: each label independently, with probability
/// `rate`, is replaced by a uniformly chosen *different* class.
pub fn inject_label_noise(ds: &Dataset, rate: f64, rng: &mut Rng) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::domain(format!("noise rate {rate} outside [0, 1]")));
    }
    let k = ds.num_classes;
    let labels = ds
        .labels
        .iter()
        .map(|&y| {
            if rng.uniform() < rate {
                let other = rng.below(k - 1);
                if other >= y {
                    other + 1
                } else {
                    other
                }
            } else {
                y
            }
        })
        .collect();
    Ok(Dataset {
        features: ds.features.clone(),
        labels,
        num_classes: k,
        provenance: Provenance::Derived,
    })
}

/// Seeded shuffle split; the validation part gets `round(n · val_fraction)` samples.
pub fn split(ds: &Dataset, val_fraction: f64, rng: &mut Rng) -> Result<(Dataset, Dataset)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::domain(format!(
            "validation fraction {val_fraction} outside (0, 1)"
        )));
    }
    let n = ds.len();
    let n_val = (n as f64 * val_fraction).round() as usize;
    if n_val == 0 || n_val == n {
        return Err(Error::domain(format!(
            "splitting {n} samples at {val_fraction} leaves an empty side"
        )));
    }
    let perm = rng.permutation(n);
    let (val_idx, train_idx) = perm.split_at(n_val);
    Ok((ds.subset(train_idx), ds.subset(val_idx)))
}
