//! Appearance embeddings and the cosine appearance cost.

use crate::error::{Error, Result};

/// A re-identification feature vector. Always finite with non-zero norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("embedding has no components".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("embedding has a non-finite component".into()));
        }
        if norm(&values) == 0.0 {
            return Err(Error::Domain("embedding has zero norm".into()));
        }
        Ok(Embedding(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Same direction, unit length.
    pub fn normalized(&self) -> Embedding {
        let n = self.norm();
        Embedding(self.0.iter().map(|v| v / n).collect())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_dims(a: &Embedding, b: &Embedding) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    Ok(())
}

/// `1 - cos(a, b)`, in `[0, 2]`. Lower means more similar.
pub fn cosine_cost(a: &Embedding, b: &Embedding) -> Result<f64> {
    check_dims(a, b)?;
    let dot: f64 = a.0.iter().zip(&b.0).map(|(x, y)| x * y).sum();
    let cos = dot / (a.norm() * b.norm());
    Ok((1.0 - cos).clamp(0.0, 2.0))
}

/// Exponential moving average of a track feature, renormalized to unit
/// length. `alpha` weights the existing feature.
pub fn update_track_feature(
    current: &Embedding,
    observed: &Embedding,
    alpha: f64,
) -> Result<Embedding> {
    check_dims(current, observed)?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Domain(format!("ema alpha {alpha} outside [0, 1]")));
    }
    let c = current.normalized();
    let o = observed.normalized();
    let mixed: Vec<f64> =
        c.0.iter()
            .zip(&o.0)
            .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
            .collect();
    // Opposite unit vectors at alpha = 0.5 cancel out; keep the old feature.
    match Embedding::new(mixed) {
        Ok(e) => Ok(e.normalized()),
        Err(_) => Ok(c),
    }
}
