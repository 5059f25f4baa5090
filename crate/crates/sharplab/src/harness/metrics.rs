use crate::error::{Error, Result};
use crate::model::{Mlp, ParamVector, Sample};

/// Fraction of samples whose argmax prediction matches the label.
pub fn accuracy(mlp: &Mlp, w: &ParamVector, samples: &[Sample]) -> f64 {
    debug_assert!(!samples.is_empty());
    let correct = samples
        .iter()
        .filter(|s| mlp.predict(w, &s.features) == s.label)
        .count();
    correct as f64 / samples.len() as f64
}

pub fn predictions(mlp: &Mlp, w: &ParamVector, samples: &[Sample]) -> Vec<usize> {
    samples.iter().map(|s| mlp.predict(w, &s.features)).collect()
}

/// Matthews correlation coefficient for binary predictions:
/// (TP·TN − FP·FN) / sqrt((TP+FP)(TP+FN)(TN+FP)(TN+FN)), defined as 0 when
/// any factor of the denominator vanishes.
pub fn matthews_corrcoef(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Domain("matthews_corrcoef on empty input".into()));
    }
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if predictions.iter().chain(labels).any(|&v| v > 1) {
        return Err(Error::Domain(
            "matthews_corrcoef requires binary classes {0, 1}".into(),
        ));
    }
    let mut tp = 0f64;
    let mut tn = 0f64;
    let mut fp = 0f64;
    let mut fn_ = 0f64;
    for (&p, &l) in predictions.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1.0,
            (0, 0) => tn += 1.0,
            (1, 0) => fp += 1.0,
            (0, 1) => fn_ += 1.0,
            _ => unreachable!(),
        }
    }
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    if factors.iter().any(|&f| f == 0.0) {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fn_) / factors.iter().product::<f64>().sqrt())
}

pub fn mean(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than two
/// values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
