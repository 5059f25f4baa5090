use crate::error::{Error, Result};

/// One-cycle learning-rate schedule: linear warmup from peak/25 to the peak
/// over the warmup fraction of steps, then cosine decay to peak/1e4 at the
/// final step.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub peak_lr: f64,
    pub total_steps: usize,
    pub warmup_fraction: f64,
}

/// lr at step 0 is peak / WARMUP_START_DIV.
pub const WARMUP_START_DIV: f64 = 25.0;
/// lr at the last step is peak / FLOOR_DIV.
pub const FLOOR_DIV: f64 = 1e4;

impl LrSchedule {
    pub fn new(peak_lr: f64, total_steps: usize, warmup_fraction: f64) -> Result<Self> {
        if peak_lr <= 0.0 {
            return Err(Error::Domain("peak_lr must be positive".into()));
        }
        if total_steps == 0 {
            return Err(Error::Domain("total_steps must be positive".into()));
        }
        if !(0.0..1.0).contains(&warmup_fraction) {
            return Err(Error::Domain(format!(
                "warmup_fraction must be in [0, 1), got {warmup_fraction}"
            )));
        }
        Ok(Self {
            peak_lr,
            total_steps,
            warmup_fraction,
        })
    }

    /// Number of warmup steps: ⌈fraction · total⌉.
    pub fn warmup_steps(&self) -> usize {
        (self.warmup_fraction * self.total_steps as f64).ceil() as usize
    }

    pub fn lr_at(&self, step: usize) -> Result<f64> {
        if step >= self.total_steps {
            return Err(Error::Domain(format!(
                "step {} out of range (total_steps = {})",
                step, self.total_steps
            )));
        }
        let warmup = self.warmup_steps();
        let start = self.peak_lr / WARMUP_START_DIV;
        let floor = self.peak_lr / FLOOR_DIV;
        if step < warmup {
            Ok(start + (self.peak_lr - start) * step as f64 / warmup as f64)
        } else {
            let span = self.total_steps - 1 - warmup;
            if span == 0 {
                return Ok(self.peak_lr);
            }
            let progress = (step - warmup) as f64 / span as f64;
            let cosine = 0.5 * (1.0 + (std::f64::consts::PI * progress).cos());
            Ok(floor + (self.peak_lr - floor) * cosine)
        }
    }
}
