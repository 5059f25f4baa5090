//! Sharpness-aware update rules and base optimizers.
//!
//! [`sam_gradient`] evaluates the gradient at an adversarially perturbed
//! point: ∇L(w + ρ·∇L(w)/|∇L(w)|₂), two gradient evaluations per call.
//! [`msam_gradient`] applies the same rule independently to each of the m
//! disjoint micro-batches of a partition and averages the perturbed
//! gradients, weighting by shard size. With m = 1 the two coincide exactly:
//! the call sequence is identical, so the results match bit for bit.

mod base;
mod schedule;

pub use base::{BaseOptimizer, OptimizerKind};
pub use schedule::LrSchedule;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{Objective, ParamVector, Sample};

/// Gradients with ℓ2 norm below this skip the perturbation entirely
/// (the ascent direction is undefined there).
pub const ZERO_GRAD_NORM_THRESHOLD: f64 = 1e-12;

/// What to do when a shard's gradient is (numerically) zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroGradPolicy {
    #[default]
    SkipPerturbation,
}

/// Sharpness-aware hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessConfig {
    /// Perturbation radius ρ.
    pub rho: f64,
    /// Number of micro-batches; m = 1 is plain SAM.
    pub m: usize,
    /// Only the ℓ2 norm is supported.
    pub norm_order: u32,
    pub zero_grad_policy: ZeroGradPolicy,
}

impl SharpnessConfig {
    pub fn new(rho: f64, m: usize) -> Self {
        Self {
            rho,
            m,
            norm_order: 2,
            zero_grad_policy: ZeroGradPolicy::SkipPerturbation,
        }
    }

    /// Config-level validation for sharpness-aware runs. `rho = 0` is still
    /// accepted by the gradient functions themselves (useful in tests).
    pub fn validate(&self, batch_size: usize) -> Result<()> {
        if self.rho <= 0.0 {
            return Err(Error::Domain(format!(
                "rho must be positive in sharpness-aware mode, got {}",
                self.rho
            )));
        }
        if self.m == 0 {
            return Err(Error::Domain("m must be at least 1".into()));
        }
        if self.m > batch_size {
            return Err(Error::Domain(format!(
                "m = {} exceeds batch size {}",
                self.m, batch_size
            )));
        }
        if self.norm_order != 2 {
            return Err(Error::Domain(format!(
                "norm_order {} unsupported; only 2 is implemented",
                self.norm_order
            )));
        }
        Ok(())
    }
}

/// Closed-form maximizer of the linearized inner problem:
/// ε̂ = ρ · g / |g|₂, or the zero vector when |g|₂ < 1e-12.
pub fn sam_perturbation(g: &ParamVector, rho: f64) -> ParamVector {
    let norm = g.norm();
    if norm < ZERO_GRAD_NORM_THRESHOLD {
        ParamVector::zeros(g.len())
    } else {
        g.scaled(rho / norm)
    }
}

/// Gradient evaluated at the perturbed point w + ε̂. Exactly two gradient
/// evaluations over `batch`.
pub fn sam_gradient<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    batch: &[Sample],
    cfg: &SharpnessConfig,
) -> Result<ParamVector> {
    let g = obj.grad(w, batch)?;
    let eps_hat = sam_perturbation(&g, cfg.rho);
    let mut w_adv = w.clone();
    w_adv.add_scaled(1.0, &eps_hat);
    obj.grad(&w_adv, batch)
}

/// Disjoint micro-batch index shards covering a minibatch.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroBatchPartition {
    shards: Vec<Vec<usize>>,
}

impl MicroBatchPartition {
    pub fn shards(&self) -> &[Vec<usize>] {
        &self.shards
    }

    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn total(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    /// Checks the partition is a disjoint cover of `0..batch_size`.
    pub fn check_covers(&self, batch_size: usize) -> Result<()> {
        let mut seen = vec![false; batch_size];
        for shard in &self.shards {
            for &i in shard {
                if i >= batch_size || seen[i] {
                    return Err(Error::Domain(
                        "partition does not form a disjoint cover of the batch".into(),
                    ));
                }
                seen[i] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::Domain(
                "partition does not cover the whole batch".into(),
            ))
        }
    }
}

/// Splits `0..batch_size` into m shards of size ⌈n/m⌉ or ⌊n/m⌋.
///
/// Membership comes from a contiguous split of a seeded shuffle; each shard
/// is then put in ascending index order so that accumulation order is
/// canonical (with m = 1 this makes the single shard the identity
/// permutation, which keeps the SAM reduction bit-exact).
pub fn partition_minibatch(batch_size: usize, m: usize, seed: u64) -> Result<MicroBatchPartition> {
    if m == 0 {
        return Err(Error::Domain("m must be at least 1".into()));
    }
    if m > batch_size {
        return Err(Error::Domain(format!(
            "m = {m} exceeds batch size {batch_size}"
        )));
    }
    let mut indices: Vec<usize> = (0..batch_size).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let base = batch_size / m;
    let remainder = batch_size % m;
    let mut shards = Vec::with_capacity(m);
    let mut start = 0;
    for i in 0..m {
        let size = base + usize::from(i < remainder);
        let mut shard = indices[start..start + size].to_vec();
        shard.sort_unstable();
        shards.push(shard);
        start += size;
    }
    Ok(MicroBatchPartition { shards })
}

/// Micro-batch averaged sharpness-aware gradient:
/// Σ_i (|S_i|/|S|) · ∇L_{S_i}(w + ρ·∇L_{S_i}(w)/|∇L_{S_i}(w)|₂),
/// accumulated in fixed shard order with the same ρ for every shard.
pub fn msam_gradient<O: Objective + ?Sized>(
    obj: &O,
    w: &ParamVector,
    batch: &[Sample],
    partition: &MicroBatchPartition,
    cfg: &SharpnessConfig,
) -> Result<ParamVector> {
    partition.check_covers(batch.len())?;
    let total = batch.len() as f64;
    let mut acc = ParamVector::zeros(w.len());
    for shard in &partition.shards {
        if shard.is_empty() {
            return Err(Error::Domain("empty micro-batch shard".into()));
        }
        let shard_samples: Vec<Sample> = shard.iter().map(|&i| batch[i].clone()).collect();
        let g = obj.grad(w, &shard_samples)?;
        let eps_hat = sam_perturbation(&g, cfg.rho);
        let mut w_adv = w.clone();
        w_adv.add_scaled(1.0, &eps_hat);
        let h = obj.grad(&w_adv, &shard_samples)?;
        acc.add_scaled(shard.len() as f64 / total, &h);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::toy::PerSampleQuadratic;
    use crate::model::{Activation, LossConfig, Mlp, ModelSpec};
    use rand::Rng;

    #[test]
    fn perturbation_direct_example() {
        let eps = sam_perturbation(&ParamVector::from_vec(vec![3.0, 4.0]), 0.2);
        assert!((eps.as_slice()[0] - 0.12).abs() < 1e-15);
        assert!((eps.as_slice()[1] - 0.16).abs() < 1e-15);
        assert!((eps.norm() - 0.2).abs() < 1e-10);
    }

    #[test]
    fn perturbation_zero_gradient_policy() {
        let eps = sam_perturbation(&ParamVector::zeros(4), 0.2);
        assert_eq!(eps, ParamVector::zeros(4));
        // Just below the threshold also maps to zero.
        let tiny = ParamVector::from_vec(vec![1e-13, 0.0]);
        assert_eq!(sam_perturbation(&tiny, 0.2), ParamVector::zeros(2));
    }

    #[test]
    fn perturbation_norm_and_direction_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let dim = rng.gen_range(1..20);
            let g = ParamVector::from_vec(
                (0..dim).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect(),
            );
            if g.norm() < ZERO_GRAD_NORM_THRESHOLD {
                continue;
            }
            let rho = rng.gen::<f64>() * 2.0 + 0.01;
            let eps = sam_perturbation(&g, rho);
            assert!((eps.norm() - rho).abs() < 1e-10);
            for alpha in [0.5, 2.0, 173.25] {
                let eps_scaled = sam_perturbation(&g.scaled(alpha), rho);
                for (a, b) in eps_scaled.as_slice().iter().zip(eps.as_slice()) {
                    assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn sam_gradient_one_dim_quadratic() {
        // L(w) = w²/2 at w = 1 with rho = 0.1: ascent to 1.1, gradient 1.1.
        let obj = PerSampleQuadratic::new(1);
        let batch = vec![Sample::new(vec![1.0], 0)];
        let w = ParamVector::from_vec(vec![1.0]);
        let g = sam_gradient(&obj, &w, &batch, &SharpnessConfig::new(0.1, 1)).unwrap();
        assert!((g.as_slice()[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn sam_gradient_rho_zero_reduces_to_grad() {
        let spec = ModelSpec {
            input_dim: 2,
            hidden_layers: vec![(4, Activation::Relu)],
            num_classes: 2,
            init_seed: 5,
        };
        let mlp = Mlp::new(&spec, LossConfig::default()).unwrap();
        let w = mlp.init_params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let batch: Vec<Sample> = (0..8)
            .map(|_| Sample::new(vec![rng.gen(), rng.gen()], rng.gen_range(0..2)))
            .collect();
        let plain = mlp.grad(&w, &batch).unwrap();
        let sam = sam_gradient(&mlp, &w, &batch, &SharpnessConfig::new(0.0, 1)).unwrap();
        assert_eq!(plain, sam);
    }

    #[test]
    fn partition_exact_split_512_by_32() {
        let p = partition_minibatch(512, 32, 9).unwrap();
        assert_eq!(p.m(), 32);
        assert!(p.shards().iter().all(|s| s.len() == 16));
        p.check_covers(512).unwrap();
    }

    #[test]
    fn partition_uneven_sizes() {
        let p = partition_minibatch(10, 3, 1).unwrap();
        let mut sizes: Vec<usize> = p.shards().iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![3, 3, 4]);
        p.check_covers(10).unwrap();
    }

    #[test]
    fn partition_m1_is_identity_order() {
        let p = partition_minibatch(8, 1, 77).unwrap();
        assert_eq!(p.shards(), &[vec![0, 1, 2, 3, 4, 5, 6, 7]]);
    }

    #[test]
    fn partition_rejects_bad_m() {
        assert!(matches!(partition_minibatch(4, 5, 0), Err(Error::Domain(_))));
        assert!(matches!(partition_minibatch(4, 0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn partition_is_deterministic() {
        assert_eq!(
            partition_minibatch(17, 4, 123).unwrap(),
            partition_minibatch(17, 4, 123).unwrap()
        );
        assert_ne!(
            partition_minibatch(17, 4, 123).unwrap(),
            partition_minibatch(17, 4, 124).unwrap()
        );
    }

    #[test]
    fn msam_hand_computed_quadratic_fixture() {
        // Per-sample losses a_i w²/2 with a = (1,2,3,4), shards {0,1} and
        // {2,3}, w = 1, rho = 0.1. Shard gradients 1.5 and 3.5, both
        // perturbed by +0.1, post-gradients 1.65 and 3.85, mean 2.75.
        let obj = PerSampleQuadratic::new(1);
        let batch: Vec<Sample> = [1.0, 2.0, 3.0, 4.0]
            .iter()
            .map(|&a| Sample::new(vec![a], 0))
            .collect();
        let partition = MicroBatchPartition {
            shards: vec![vec![0, 1], vec![2, 3]],
        };
        let w = ParamVector::from_vec(vec![1.0]);
        let g = msam_gradient(&obj, &w, &batch, &partition, &SharpnessConfig::new(0.1, 2)).unwrap();
        assert!((g.as_slice()[0] - 2.75).abs() < 1e-12);
    }

    #[test]
    fn msam_m1_equals_sam_bit_exactly() {
        let spec = ModelSpec {
            input_dim: 3,
            hidden_layers: vec![(6, Activation::Tanh)],
            num_classes: 3,
            init_seed: 31,
        };
        let mlp = Mlp::new(&spec, LossConfig { label_smoothing: 0.1, weight_decay: 0.0 }).unwrap();
        let w = mlp.init_params();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch: Vec<Sample> = (0..8)
            .map(|_| {
                Sample::new(
                    (0..3).map(|_| rng.gen::<f64>()).collect(),
                    rng.gen_range(0..3),
                )
            })
            .collect();
        let cfg = SharpnessConfig::new(0.05, 1);
        let partition = partition_minibatch(batch.len(), 1, 999).unwrap();
        let a = sam_gradient(&mlp, &w, &batch, &cfg).unwrap();
        let b = msam_gradient(&mlp, &w, &batch, &partition, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn msam_invariant_under_in_place_shard_duplication() {
        let obj = PerSampleQuadratic::new(2);
        let batch: Vec<Sample> = [0.5, 1.5, 2.5, 3.5]
            .iter()
            .map(|&a| Sample::new(vec![a, 0.0], 0))
            .collect();
        let w = ParamVector::from_vec(vec![0.8, -0.6]);
        let cfg = SharpnessConfig::new(0.1, 2);
        let p1 = MicroBatchPartition {
            shards: vec![vec![0, 1], vec![2, 3]],
        };
        let g1 = msam_gradient(&obj, &w, &batch, &p1, &cfg).unwrap();

        // Duplicate each shard's samples in place.
        let doubled: Vec<Sample> = vec![
            batch[0].clone(),
            batch[1].clone(),
            batch[0].clone(),
            batch[1].clone(),
            batch[2].clone(),
            batch[3].clone(),
            batch[2].clone(),
            batch[3].clone(),
        ];
        let p2 = MicroBatchPartition {
            shards: vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]],
        };
        let g2 = msam_gradient(&obj, &w, &doubled, &p2, &cfg).unwrap();
        for (a, b) in g1.as_slice().iter().zip(g2.as_slice()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn msam_rejects_non_covering_partition() {
        let obj = PerSampleQuadratic::new(1);
        let batch: Vec<Sample> = (0..4).map(|i| Sample::new(vec![i as f64], 0)).collect();
        let w = ParamVector::from_vec(vec![1.0]);
        let cfg = SharpnessConfig::new(0.1, 2);
        let missing = MicroBatchPartition {
            shards: vec![vec![0, 1], vec![2]],
        };
        assert!(msam_gradient(&obj, &w, &batch, &missing, &cfg).is_err());
        let overlapping = MicroBatchPartition {
            shards: vec![vec![0, 1], vec![1, 2, 3]],
        };
        assert!(msam_gradient(&obj, &w, &batch, &overlapping, &cfg).is_err());
    }

    #[test]
    fn gradient_call_accounting_is_2m() {
        let spec = ModelSpec {
            input_dim: 2,
            hidden_layers: vec![],
            num_classes: 2,
            init_seed: 3,
        };
        let mlp = Mlp::new(&spec, LossConfig::default()).unwrap();
        let w = mlp.init_params();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let batch: Vec<Sample> = (0..12)
            .map(|_| Sample::new(vec![rng.gen(), rng.gen()], rng.gen_range(0..2)))
            .collect();
        for m in [1usize, 2, 3, 4, 6] {
            let cfg = SharpnessConfig::new(0.1, m);
            let partition = partition_minibatch(batch.len(), m, 5).unwrap();
            mlp.reset_grad_evals();
            msam_gradient(&mlp, &w, &batch, &partition, &cfg).unwrap();
            assert_eq!(mlp.grad_eval_count(), 2 * m as u64);
        }
    }

    #[test]
    fn sharpness_config_validation() {
        assert!(SharpnessConfig::new(0.1, 4).validate(64).is_ok());
        assert!(SharpnessConfig::new(0.0, 4).validate(64).is_err());
        assert!(SharpnessConfig::new(0.1, 0).validate(64).is_err());
        assert!(SharpnessConfig::new(0.1, 65).validate(64).is_err());
        let mut bad_norm = SharpnessConfig::new(0.1, 4);
        bad_norm.norm_order = 1;
        assert!(bad_norm.validate(64).is_err());
    }
}
