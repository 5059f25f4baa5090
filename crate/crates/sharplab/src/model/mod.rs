//! Differentiable models and losses.
//!
//! The central abstraction is [`Objective`]: an empirical loss over a batch
//! of [`Sample`]s, differentiable with respect to a flat [`ParamVector`].
//! The main implementor is [`Mlp`], a dense feed-forward classifier with
//! softmax cross-entropy and label smoothing, whose gradient is exact
//! reverse-mode backpropagation. Hessian-vector products come from central
//! finite differences of the gradient, so any `Objective` gets them for free.

mod mlp;
mod params;
pub mod toy;

pub use mlp::{Activation, LossConfig, Mlp, ModelSpec};
pub use params::ParamVector;

use crate::error::{Error, Result};

/// One labelled example: a feature vector and a class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self { features, label }
    }
}

/// Step size for the central-difference Hessian-vector product.
pub const HVP_EPSILON: f64 = 1e-4;

/// A differentiable empirical loss over batches of samples.
///
/// `loss` and `grad` are means over the batch, so duplicating every sample
/// leaves both unchanged. Implementations must be pure: identical inputs
/// produce bit-identical outputs.
pub trait Objective: Sync {
    /// Number of parameters d.
    fn dim(&self) -> usize;

    /// Mean loss over `batch` at parameters `w`.
    fn loss(&self, w: &ParamVector, batch: &[Sample]) -> Result<f64>;

    /// Exact gradient of [`Objective::loss`] with respect to `w`.
    fn grad(&self, w: &ParamVector, batch: &[Sample]) -> Result<ParamVector>;

    /// Hessian-vector product H·v for the mean loss over `batch`.
    ///
    /// Approximated by central differences of the gradient along the unit
    /// direction of `v`, scaled back by |v|:
    /// (grad(w + ε·v̂) − grad(w − ε·v̂)) / (2ε) · |v| with ε = 1e-4.
    fn hvp(&self, w: &ParamVector, v: &ParamVector, batch: &[Sample]) -> Result<ParamVector> {
        let v_norm = v.norm();
        if !(v_norm > 0.0) {
            return Err(Error::Domain(
                "hvp requires a nonzero direction vector".into(),
            ));
        }
        if v.len() != w.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: v.len(),
            });
        }
        let step = HVP_EPSILON / v_norm;
        let mut w_plus = w.clone();
        w_plus.add_scaled(step, v);
        let mut w_minus = w.clone();
        w_minus.add_scaled(-step, v);
        let g_plus = self.grad(&w_plus, batch)?;
        let g_minus = self.grad(&w_minus, batch)?;
        let mut hv = g_plus;
        hv.add_scaled(-1.0, &g_minus);
        hv.scale(v_norm / (2.0 * HVP_EPSILON));
        Ok(hv)
    }
}

#[cfg(test)]
mod tests {
    use super::toy::DiagQuadratic;
    use super::*;

    fn dummy_batch(n: usize) -> Vec<Sample> {
        (0..n).map(|i| Sample::new(vec![i as f64], 0)).collect()
    }

    #[test]
    fn hvp_on_quadratic_matches_known_hessian() {
        // L(w) = (2 w1^2 + w2^2) / 2 has constant Hessian diag(2, 1).
        let obj = DiagQuadratic::new(vec![2.0, 1.0]);
        let w = ParamVector::from_vec(vec![0.3, -0.7]);
        let batch = dummy_batch(3);

        let hv = obj
            .hvp(&w, &ParamVector::from_vec(vec![1.0, 0.0]), &batch)
            .unwrap();
        assert!((hv.as_slice()[0] - 2.0).abs() < 1e-6);
        assert!(hv.as_slice()[1].abs() < 1e-6);
    }

    #[test]
    fn hvp_is_linear_in_v() {
        let obj = DiagQuadratic::new(vec![2.0, 1.0, 0.5]);
        let w = ParamVector::from_vec(vec![0.1, 0.2, 0.3]);
        let v = ParamVector::from_vec(vec![0.4, -1.2, 2.0]);
        let batch = dummy_batch(2);

        let base = obj.hvp(&w, &v, &batch).unwrap();
        for alpha in [2.0, -3.0] {
            let scaled = obj.hvp(&w, &v.scaled(alpha), &batch).unwrap();
            for (a, b) in scaled.as_slice().iter().zip(base.as_slice()) {
                let expect = alpha * b;
                assert!(
                    (a - expect).abs() <= 1e-6 * expect.abs().max(1.0),
                    "alpha={alpha}: got {a}, expected {expect}"
                );
            }
        }
    }

    #[test]
    fn hvp_rejects_zero_direction() {
        let obj = DiagQuadratic::new(vec![1.0]);
        let w = ParamVector::from_vec(vec![0.5]);
        let err = obj
            .hvp(&w, &ParamVector::zeros(1), &dummy_batch(1))
            .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }
}
