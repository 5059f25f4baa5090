use crate::error::{Error, Result};

/// Flat vector of all model parameters (w ∈ R^d).
///
/// The length is fixed by the model and never changes during a run; after
/// every optimizer step all entries must be finite (checked by the harness).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean (ℓ2) norm.
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Returns `alpha * self` as a new vector.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self(self.0.iter().map(|x| alpha * x).collect())
    }

    /// In-place `self *= alpha`.
    pub fn scale(&mut self, alpha: f64) {
        for x in &mut self.0 {
            *x *= alpha;
        }
    }

    /// In-place `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (x, y) in self.0.iter_mut().zip(&other.0) {
            *x += alpha * y;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_and_dot() {
        let v = ParamVector::from_vec(vec![3.0, 4.0]);
        assert_eq!(v.norm(), 5.0);
        let u = ParamVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(v.dot(&u), -1.0);
    }

    #[test]
    fn add_scaled_accumulates() {
        let mut v = ParamVector::zeros(2);
        v.add_scaled(2.0, &ParamVector::from_vec(vec![1.0, -0.5]));
        assert_eq!(v.as_slice(), &[2.0, -1.0]);
    }

    #[test]
    fn finiteness_check() {
        assert!(ParamVector::from_vec(vec![1.0, 0.0]).all_finite());
        assert!(!ParamVector::from_vec(vec![f64::NAN]).all_finite());
        assert!(!ParamVector::from_vec(vec![f64::INFINITY]).all_finite());
    }
}
