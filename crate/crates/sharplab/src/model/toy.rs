//! Reference objectives with closed-form losses, gradients and Hessians.
//!
//! These are used to sanity-check the optimizer and diagnostics layers
//! against hand-computable values; they are not models of any data.

use super::{Objective, ParamVector, Sample};
use crate::error::{Error, Result};

/// L(w) = ½ Σ_j d_j w_j², independent of the samples. Hessian = diag(d).
#[derive(Debug, Clone)]
pub struct DiagQuadratic {
    diag: Vec<f64>,
}

impl DiagQuadratic {
    pub fn new(diag: Vec<f64>) -> Self {
        Self { diag }
    }
}

impl Objective for DiagQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn loss(&self, w: &ParamVector, batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        w.check_dim(self.diag.len())?;
        Ok(0.5
            * w.as_slice()
                .iter()
                .zip(&self.diag)
                .map(|(x, d)| d * x * x)
                .sum::<f64>())
    }

    fn grad(&self, w: &ParamVector, batch: &[Sample]) -> Result<ParamVector> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        w.check_dim(self.diag.len())?;
        Ok(ParamVector::from_vec(
            w.as_slice()
                .iter()
                .zip(&self.diag)
                .map(|(x, d)| d * x)
                .collect(),
        ))
    }
}

/// Per-sample quadratic: ℓ(w; x) = a · ½ |w|² with a = features[0], so the
/// batch loss is mean(a_i) · ½ |w|² and the gradient mean(a_i) · w.
#[derive(Debug, Clone)]
pub struct PerSampleQuadratic {
    dim: usize,
}

impl PerSampleQuadratic {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    fn mean_coeff(batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        Ok(batch.iter().map(|s| s.features[0]).sum::<f64>() / batch.len() as f64)
    }
}

impl Objective for PerSampleQuadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, w: &ParamVector, batch: &[Sample]) -> Result<f64> {
        w.check_dim(self.dim)?;
        let a = Self::mean_coeff(batch)?;
        Ok(0.5 * a * w.dot(w))
    }

    fn grad(&self, w: &ParamVector, batch: &[Sample]) -> Result<ParamVector> {
        w.check_dim(self.dim)?;
        let a = Self::mean_coeff(batch)?;
        Ok(w.scaled(a))
    }
}

/// Loss identically zero; every gradient and Hessian vanishes.
#[derive(Debug, Clone)]
pub struct ZeroLoss {
    dim: usize,
}

impl ZeroLoss {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Objective for ZeroLoss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn loss(&self, w: &ParamVector, batch: &[Sample]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        w.check_dim(self.dim)?;
        Ok(0.0)
    }

    fn grad(&self, w: &ParamVector, batch: &[Sample]) -> Result<ParamVector> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        w.check_dim(self.dim)?;
        Ok(ParamVector::zeros(self.dim))
    }
}
