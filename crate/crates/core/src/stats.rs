//! Two-sample distances between empirical distributions.

use serde::Serialize;

use crate::error::{Error, Result};

/// Values sorted ascending, with the replicate index each came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionSample {
    values: Vec<f64>,
    replicates: Vec<u64>,
}

impl DistributionSample {
    /// Panics on NaN.
    pub fn new(mut pairs: Vec<(u64, f64)>) -> Self {
        pairs.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("NaN in sample").then(a.0.cmp(&b.0)));
        let (replicates, values) = pairs.into_iter().unzip();
        Self { values, replicates }
    }

    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Self {
        Self::new(values.into_iter().enumerate().map(|(i, v)| (i as u64, v)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn replicates(&self) -> &[u64] {
        &self.replicates
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Empirical `q`-quantile (lower, by rank `ceil(qR)`).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if self.is_empty() {
            return Err(Error::EmptySample);
        }
        let rank = ((q * self.len() as f64).ceil() as usize).clamp(1, self.len());
        Ok(self.values[rank - 1])
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// `sup_t |F_a(t) - F_b(t)|` by a merged sweep over both samples.
pub fn ks_two_sample(a: &DistributionSample, b: &DistributionSample) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (x, y) = (a.values(), b.values());
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] == t {
            i += 1;
        }
        while j < y.len() && y[j] == t {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// `(1/R) Σ |a_(i) - b_(i)|` for equal-length samples.
pub fn wasserstein1(a: &DistributionSample, b: &DistributionSample) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::EmptySample);
    }
    let s: f64 = a.values().iter().zip(b.values()).map(|(p, q)| (p - q).abs()).sum();
    Ok(s / a.len() as f64)
}
