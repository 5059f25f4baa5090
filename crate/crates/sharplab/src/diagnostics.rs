//! Sharpness measurement: dominant Hessian eigenvalue of the mean loss over
//! a dataset, estimated by power iteration on Hessian-vector products.
//!
//! The full-dataset HVP is assembled as a size-weighted mean of per-chunk
//! HVPs in fixed chunk order, so memory stays bounded and results are
//! deterministic. Power iteration tracks the magnitude-dominant eigenvalue;
//! the signed Rayleigh quotient is reported and a negative dominant value is
//! flagged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Objective, ParamVector, Sample};

/// |Hv| below this aborts the iteration as underflow.
pub const HV_UNDERFLOW: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerIterationConfig {
    /// Relative Rayleigh-quotient change under which iteration stops.
    pub tol: f64,
    pub max_iters: usize,
    /// Samples per HVP chunk.
    pub chunk_size: usize,
}

impl Default for PowerIterationConfig {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_iters: 100,
            chunk_size: 256,
        }
    }
}

impl PowerIterationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tol <= 0.0 {
            return Err(Error::Domain("power-iteration tol must be positive".into()));
        }
        if self.max_iters == 0 || self.chunk_size == 0 {
            return Err(Error::Domain(
                "power-iteration max_iters and chunk_size must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// λ_max estimate with convergence metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessReport {
    /// Signed Rayleigh quotient at the stopping iterate.
    pub lambda_max: f64,
    pub iterations_used: usize,
    pub rel_change_at_stop: f64,
    pub converged: bool,
    pub seed: u64,
    /// Set when the magnitude-dominant eigenvalue is negative.
    pub negative_dominant: bool,
    /// Rayleigh quotient after each iteration.
    pub rayleigh_history: Vec<f64>,
}

/// Mean-loss HVP over the whole dataset, chunked.
fn full_dataset_hvp<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    dataset: &[Sample],
    v: &ParamVector,
    chunk_size: usize,
) -> Result<ParamVector> {
    let n = dataset.len() as f64;
    let mut acc = ParamVector::zeros(w.len());
    for chunk in dataset.chunks(chunk_size) {
        let hv = obj.hvp(w, v, chunk)?;
        acc.add_scaled(chunk.len() as f64 / n, &hv);
    }
    Ok(acc)
}

/// Power iteration for the dominant Hessian eigenvalue at `w` over the mean
/// loss on `dataset`, starting from a seeded random unit vector.
///
/// Stops when |λ_k − λ_{k−1}| / max(|λ_k|, 1e-12) < tol, on iteration
/// exhaustion, or on HVP underflow (reported as non-converged with the last
/// Rayleigh quotient).
pub fn lambda_max<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    dataset: &[Sample],
    cfg: &PowerIterationConfig,
    seed: u64,
) -> Result<SharpnessReport> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = w.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = loop {
        let candidate = ParamVector::from_vec(
            (0..dim)
                .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
                .collect(),
        );
        let norm = candidate.norm();
        if norm > 1e-8 {
            break candidate.scaled(1.0 / norm);
        }
    };

    let mut history = Vec::new();
    let mut prev: Option<f64> = None;
    let mut rel_change = f64::INFINITY;
    for k in 1..=cfg.max_iters {
        let hv = full_dataset_hvp(obj, w, dataset, &v, cfg.chunk_size)?;
        let lam = v.dot(&hv);
        history.push(lam);
        if let Some(p) = prev {
            rel_change = (lam - p).abs() / lam.abs().max(1e-12);
        }
        let hv_norm = hv.norm();
        if hv_norm < HV_UNDERFLOW {
            return Ok(SharpnessReport {
                lambda_max: lam,
                iterations_used: k,
                rel_change_at_stop: rel_change,
                converged: false,
                seed,
                negative_dominant: lam < 0.0,
                rayleigh_history: history,
            });
        }
        if rel_change < cfg.tol {
            return Ok(SharpnessReport {
                lambda_max: lam,
                iterations_used: k,
                rel_change_at_stop: rel_change,
                converged: true,
                seed,
                negative_dominant: lam < 0.0,
                rayleigh_history: history,
            });
        }
        prev = Some(lam);
        v = hv.scaled(1.0 / hv_norm);
    }

    let lam = *history.last().expect("max_iters >= 1");
    Ok(SharpnessReport {
        lambda_max: lam,
        iterations_used: cfg.max_iters,
        rel_change_at_stop: rel_change,
        converged: false,
        seed,
        negative_dominant: lam < 0.0,
        rayleigh_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::toy::{DiagQuadratic, ZeroLoss};

    fn dummy_dataset(n: usize) -> Vec<Sample> {
        (0..n).map(|i| Sample::new(vec![i as f64], 0)).collect()
    }

    #[test]
    fn diagonal_quadratic_known_spectrum() {
        let obj = DiagQuadratic::new(vec![2.0, 1.0]);
        let w = ParamVector::from_vec(vec![0.5, -0.5]);
        let cfg = PowerIterationConfig::default();
        let report = lambda_max(&obj, &w, &dummy_dataset(10), &cfg, 3).unwrap();
        assert!(report.converged);
        assert!(
            (report.lambda_max - 2.0).abs() < cfg.tol * 2.0,
            "lambda = {}",
            report.lambda_max
        );
        assert!(!report.negative_dominant);
        assert!(report.rel_change_at_stop < cfg.tol);
        assert!(report.iterations_used <= cfg.max_iters);
    }

    #[test]
    fn seed_independent_within_twice_tol() {
        // Spectral gap 2 - 1.5 = 0.5.
        let obj = DiagQuadratic::new(vec![2.0, 1.5, 0.5]);
        let w = ParamVector::zeros(3);
        let cfg = PowerIterationConfig::default();
        let a = lambda_max(&obj, &w, &dummy_dataset(4), &cfg, 1).unwrap();
        let b = lambda_max(&obj, &w, &dummy_dataset(4), &cfg, 999).unwrap();
        assert!((a.lambda_max - b.lambda_max).abs() <= 2.0 * cfg.tol * a.lambda_max.abs());
    }

    #[test]
    fn rayleigh_sequence_monotone_on_quadratic() {
        let obj = DiagQuadratic::new(vec![3.0, 2.0, 1.0, 0.5]);
        let w = ParamVector::zeros(4);
        let cfg = PowerIterationConfig {
            tol: 1e-10,
            max_iters: 60,
            chunk_size: 4,
        };
        let report = lambda_max(&obj, &w, &dummy_dataset(8), &cfg, 7).unwrap();
        for pair in report.rayleigh_history.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-9,
                "Rayleigh sequence decreased: {} -> {}",
                pair[0],
                pair[1]
            );
        }
    }

    #[test]
    fn duplicated_dataset_leaves_lambda_unchanged() {
        let obj = DiagQuadratic::new(vec![2.0, 1.0]);
        let w = ParamVector::zeros(2);
        let cfg = PowerIterationConfig::default();
        let base = lambda_max(&obj, &w, &dummy_dataset(5), &cfg, 11).unwrap();
        let mut doubled = dummy_dataset(5);
        doubled.extend(dummy_dataset(5));
        let dup = lambda_max(&obj, &w, &doubled, &cfg, 11).unwrap();
        assert!((base.lambda_max - dup.lambda_max).abs() < cfg.tol);
    }

    #[test]
    fn fixed_seed_reproduces_the_iteration_trace() {
        let obj = DiagQuadratic::new(vec![2.0, 1.9, 0.3]);
        let w = ParamVector::zeros(3);
        let cfg = PowerIterationConfig::default();
        let a = lambda_max(&obj, &w, &dummy_dataset(6), &cfg, 42).unwrap();
        let b = lambda_max(&obj, &w, &dummy_dataset(6), &cfg, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hv_underflow_reports_non_converged() {
        let obj = ZeroLoss::new(3);
        let w = ParamVector::zeros(3);
        let report = lambda_max(
            &obj,
            &w,
            &dummy_dataset(4),
            &PowerIterationConfig::default(),
            5,
        )
        .unwrap();
        assert!(!report.converged);
        assert_eq!(report.iterations_used, 1);
        assert_eq!(report.lambda_max, 0.0);
    }

    #[test]
    fn negative_dominant_is_flagged() {
        let obj = DiagQuadratic::new(vec![-3.0, 1.0]);
        let w = ParamVector::zeros(2);
        let report = lambda_max(
            &obj,
            &w,
            &dummy_dataset(4),
            &PowerIterationConfig::default(),
            2,
        )
        .unwrap();
        assert!(report.negative_dominant);
        assert!((report.lambda_max + 3.0).abs() < 0.05);
    }

    #[test]
    fn empty_dataset_rejected() {
        let obj = DiagQuadratic::new(vec![1.0]);
        let w = ParamVector::zeros(1);
        assert!(matches!(
            lambda_max(&obj, &w, &[], &PowerIterationConfig::default(), 0),
            Err(Error::EmptyBatch)
        ));
    }
}
