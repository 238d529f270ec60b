//! Seeded synthetic data and plain CSV import.

use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::models::logistic::sigmoid;

/// Seed used for the bundled banana data set.
pub const BANANA_DATA_SEED: u64 = 20_210_512;
/// Seed used for the bundled synthetic logistic data set.
pub const LOGISTIC_DATA_SEED: u64 = 7;

/// `n` draws of `y_i ~ Normal(θ₁ + θ₂², σ_y²)`.
pub fn generate_banana_data(seed: u64, n: usize, theta: [f64; 2], sigma_y: f64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidConfig("banana data needs n ≥ 1".into()));
    }
    let normal = Normal::new(theta[0] + theta[1] * theta[1], sigma_y)
        .map_err(|e| Error::InvalidConfig(format!("banana noise scale: {e}")))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| normal.sample(&mut rng)).collect())
}

/// Standard-normal `n × k` design and Bernoulli labels with success
/// probability `σ(x_iᵀβ)`.
pub fn generate_logistic_data(
    seed: u64,
    n: usize,
    k: usize,
    beta: &DVector<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidConfig("logistic data needs n, k ≥ 1".into()));
    }
    if beta.len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            actual: beta.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut features = DMatrix::zeros(n, k);
    let mut labels = DVector::zeros(n);
    for i in 0..n {
        for j in 0..k {
            features[(i, j)] = StandardNormal.sample(&mut rng);
        }
        let prob = sigmoid(features.row(i).transpose().dot(beta));
        labels[i] = if rng.random::<f64>() < prob { 1.0 } else { 0.0 };
    }
    Ok((features, labels))
}

/// Reads a comma-separated numeric table with a header row. Every column
/// but the last is a feature; the last column is a 0/1 label.
pub fn read_logistic_csv<R: Read>(reader: R) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = csv
        .headers()
        .map_err(|e| Error::Data(e.to_string()))?
        .len();
    if width < 2 {
        return Err(Error::Data(
            "need at least one feature column and a label column".into(),
        ));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (line, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Data(e.to_string()))?;
        if record.len() != width {
            return Err(Error::Data(format!(
                "row {} has {} fields, expected {width}",
                line + 1,
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Data(format!("row {}, column {}: `{field}` is not a number", line + 1, col + 1))
            })?;
            if col + 1 == width {
                labels.push(v);
            } else {
                values.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let features = DMatrix::from_row_slice(labels.len(), width - 1, &values);
    Ok((features, DVector::from_vec(labels)))
}

pub fn load_logistic_csv(path: &Path) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    read_logistic_csv(file)
}
