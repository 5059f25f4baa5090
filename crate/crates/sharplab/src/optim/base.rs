use crate::error::{Error, Result};
use crate::model::ParamVector;

/// Base update rule and its hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum OptimizerKind {
    SgdMomentum { momentum: f64 },
    AdamW { beta1: f64, beta2: f64, eps: f64 },
}

/// Stateful base optimizer: SGD with momentum or AdamW with decoupled weight
/// decay, plus optional global-norm gradient clipping applied before either.
///
/// Weight decay acts on the outer update only; the sharpness-aware ascent
/// step never sees it.
#[derive(Debug, Clone)]
pub struct BaseOptimizer {
    kind: OptimizerKind,
    weight_decay: f64,
    grad_clip_norm: Option<f64>,
    /// Momentum buffer (SGD) or first-moment estimate (AdamW).
    buf1: Vec<f64>,
    /// Second-moment estimate (AdamW only).
    buf2: Vec<f64>,
    step_count: u64,
}

impl BaseOptimizer {
    pub fn sgd_momentum(
        dim: usize,
        momentum: f64,
        weight_decay: f64,
        grad_clip_norm: Option<f64>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::Domain(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Self::check_common(weight_decay, grad_clip_norm)?;
        Ok(Self {
            kind: OptimizerKind::SgdMomentum { momentum },
            weight_decay,
            grad_clip_norm,
            buf1: vec![0.0; dim],
            buf2: Vec::new(),
            step_count: 0,
        })
    }

    pub fn adamw(
        dim: usize,
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
        grad_clip_norm: Option<f64>,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Domain("betas must be in [0, 1)".into()));
        }
        if eps <= 0.0 {
            return Err(Error::Domain("eps must be positive".into()));
        }
        Self::check_common(weight_decay, grad_clip_norm)?;
        Ok(Self {
            kind: OptimizerKind::AdamW { beta1, beta2, eps },
            weight_decay,
            grad_clip_norm,
            buf1: vec![0.0; dim],
            buf2: vec![0.0; dim],
            step_count: 0,
        })
    }

    fn check_common(weight_decay: f64, grad_clip_norm: Option<f64>) -> Result<()> {
        if weight_decay < 0.0 {
            return Err(Error::Domain("weight_decay must be nonnegative".into()));
        }
        if let Some(c) = grad_clip_norm {
            if c <= 0.0 {
                return Err(Error::Domain("grad_clip_norm must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> &OptimizerKind {
        &self.kind
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn dim(&self) -> usize {
        self.buf1.len()
    }

    /// One parameter update in place. Clips `g` to the configured global
    /// norm first, then applies the base rule at learning rate `lr`.
    pub fn apply_update(&mut self, w: &mut ParamVector, g: &ParamVector, lr: f64) -> Result<()> {
        let dim = self.buf1.len();
        w.check_dim(dim)?;
        g.check_dim(dim)?;

        let mut clipped;
        let g_eff: &ParamVector = match self.grad_clip_norm {
            Some(clip) => {
                let norm = g.norm();
                if norm > clip {
                    clipped = g.clone();
                    clipped.scale(clip / norm);
                    &clipped
                } else {
                    g
                }
            }
            None => g,
        };

        self.step_count += 1;
        let wd = self.weight_decay;
        let wv = w.as_mut_slice();
        let gv = g_eff.as_slice();
        match self.kind {
            OptimizerKind::SgdMomentum { momentum } => {
                for j in 0..dim {
                    self.buf1[j] = momentum * self.buf1[j] + gv[j];
                    wv[j] -= lr * (self.buf1[j] + wd * wv[j]);
                }
            }
            OptimizerKind::AdamW { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bias1 = 1.0 - beta1.powi(t);
                let bias2 = 1.0 - beta2.powi(t);
                for j in 0..dim {
                    self.buf1[j] = beta1 * self.buf1[j] + (1.0 - beta1) * gv[j];
                    self.buf2[j] = beta2 * self.buf2[j] + (1.0 - beta2) * gv[j] * gv[j];
                    let m_hat = self.buf1[j] / bias1;
                    let v_hat = self.buf2[j] / bias2;
                    wv[j] -= lr * (m_hat / (v_hat.sqrt() + eps) + wd * wv[j]);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd_step() {
        let mut opt = BaseOptimizer::sgd_momentum(2, 0.0, 0.0, None).unwrap();
        let mut w = ParamVector::from_vec(vec![1.0, -2.0]);
        let g = ParamVector::from_vec(vec![0.5, -1.0]);
        opt.apply_update(&mut w, &g, 0.1).unwrap();
        assert!((w.as_slice()[0] - 0.95).abs() < 1e-15);
        assert!((w.as_slice()[1] + 1.9).abs() < 1e-15);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn momentum_two_steps_hand_unrolled() {
        // mu = 0.9, g = 1, lr = 1, w0 = 0: w1 = -1, w2 = -(1 + 1.9) = -2.9.
        let mut opt = BaseOptimizer::sgd_momentum(1, 0.9, 0.0, None).unwrap();
        let mut w = ParamVector::zeros(1);
        let g = ParamVector::from_vec(vec![1.0]);
        opt.apply_update(&mut w, &g, 1.0).unwrap();
        assert!((w.as_slice()[0] + 1.0).abs() < 1e-12);
        opt.apply_update(&mut w, &g, 1.0).unwrap();
        assert!((w.as_slice()[0] + 2.9).abs() < 1e-12);
        assert_eq!(opt.step_count(), 2);
    }

    #[test]
    fn clipping_scales_large_gradients() {
        let mut opt = BaseOptimizer::sgd_momentum(2, 0.0, 0.0, Some(1.0)).unwrap();
        let mut w = ParamVector::zeros(2);
        // |g| = 5, clip = 1 -> effective g scaled by 0.2.
        let g = ParamVector::from_vec(vec![3.0, 4.0]);
        opt.apply_update(&mut w, &g, 1.0).unwrap();
        assert!((w.as_slice()[0] + 0.6).abs() < 1e-15);
        assert!((w.as_slice()[1] + 0.8).abs() < 1e-15);

        // Below the clip threshold the gradient passes through untouched.
        let mut w2 = ParamVector::zeros(2);
        let mut opt2 = BaseOptimizer::sgd_momentum(2, 0.0, 0.0, Some(10.0)).unwrap();
        opt2.apply_update(&mut w2, &g, 1.0).unwrap();
        assert_eq!(w2.as_slice(), &[-3.0, -4.0]);
    }

    #[test]
    fn lr_zero_is_identity_on_w() {
        let mut opt = BaseOptimizer::adamw(3, 0.9, 0.999, 1e-8, 0.1, None).unwrap();
        let mut w = ParamVector::from_vec(vec![1.0, -2.0, 3.0]);
        let before = w.clone();
        let g = ParamVector::from_vec(vec![0.3, 0.1, -0.2]);
        opt.apply_update(&mut w, &g, 0.0).unwrap();
        assert_eq!(w, before);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn adamw_zero_gradient_applies_only_decoupled_decay() {
        let lr = 0.01;
        let wd = 0.1;
        let mut opt = BaseOptimizer::adamw(2, 0.9, 0.999, 1e-8, wd, None).unwrap();
        let mut w = ParamVector::from_vec(vec![5.0, -3.0]);
        let g = ParamVector::zeros(2);
        opt.apply_update(&mut w, &g, lr).unwrap();
        assert!((w.as_slice()[0] - 5.0 * (1.0 - lr * wd)).abs() < 1e-12);
        assert!((w.as_slice()[1] + 3.0 * (1.0 - lr * wd)).abs() < 1e-12);
    }

    #[test]
    fn sgd_weight_decay_enters_update() {
        let mut opt = BaseOptimizer::sgd_momentum(1, 0.0, 0.5, None).unwrap();
        let mut w = ParamVector::from_vec(vec![2.0]);
        let g = ParamVector::from_vec(vec![1.0]);
        // w <- w - lr*(g + wd*w) = 2 - 0.1*(1 + 1) = 1.8
        opt.apply_update(&mut w, &g, 0.1).unwrap();
        assert!((w.as_slice()[0] - 1.8).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut opt = BaseOptimizer::sgd_momentum(2, 0.0, 0.0, None).unwrap();
        let mut w = ParamVector::zeros(3);
        let g = ParamVector::zeros(2);
        assert!(matches!(
            opt.apply_update(&mut w, &g, 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn adamw_differs_from_coupled_l2_sgd() {
        let mut adamw = BaseOptimizer::adamw(2, 0.9, 0.999, 1e-8, 0.1, None).unwrap();
        let mut w_a = ParamVector::from_vec(vec![5.0, -3.0]);
        let g = ParamVector::from_vec(vec![10.0, -6.0]);
        adamw.apply_update(&mut w_a, &g, 0.01).unwrap();

        let mut sgd = BaseOptimizer::sgd_momentum(2, 0.0, 0.1, None).unwrap();
        let mut w_s = ParamVector::from_vec(vec![5.0, -3.0]);
        sgd.apply_update(&mut w_s, &g, 0.01).unwrap();
        assert_ne!(w_a, w_s);
    }
}
