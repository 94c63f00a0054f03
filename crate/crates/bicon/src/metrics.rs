//! Evaluation metrics: mean absolute error, adaptive-threshold mean
//! F-measure, and E-measure, plus corpus-level averaging.

use crate::error::Result;
use crate::grid::{Map, Mask};
use crate::scalar::Real;

/// β² of the F-measure, the standard saliency-benchmark setting.
pub const F_BETA_SQ: f64 = 0.3;

/// Stabilizer in the E-measure alignment denominator.
pub const E_EPS: f64 = 1e-8;

/// Mean absolute error between a prediction in [0, 1] and a binary mask.
pub fn mae<T: Real>(pred: &Map<T>, gt: &Mask) -> Result<T> {
    gt.same_shape(pred.height(), pred.width())?;
    let sum = pred
        .data()
        .iter()
        .zip(gt.data())
        .fold(T::zero(), |acc, (&p, &g)| {
            acc + (p - T::from_count(g as usize)).abs()
        });
    Ok(sum / T::from_count(pred.data().len()))
}

/// Binarize with the adaptive threshold: twice the mean prediction,
/// clamped to 1, compared with `>=`. Zero-valued pixels never count as
/// positive, so an all-zero prediction is an empty one.
fn adaptive_binarize<T: Real>(pred: &Map<T>) -> Vec<bool> {
    let t = (pred.mean() * T::from_f64_c(2.0)).min(T::one());
    pred.data().iter().map(|&p| p >= t && p > T::zero()).collect()
}

/// Mean F-measure under the adaptive threshold.
pub fn f_measure_adaptive<T: Real>(pred: &Map<T>, gt: &Mask) -> Result<T> {
    gt.same_shape(pred.height(), pred.width())?;
    let binary = adaptive_binarize(pred);
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fnn = 0usize;
    for (&b, &g) in binary.iter().zip(gt.data()) {
        match (b, g == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 || tp + fnn == 0 {
        return Ok(T::zero()); // empty prediction or empty ground truth
    }
    let precision = T::from_count(tp) / T::from_count(tp + fp);
    let recall = T::from_count(tp) / T::from_count(tp + fnn);
    let beta_sq = T::from_f64_c(F_BETA_SQ);
    let denom = beta_sq * precision + recall;
    if denom == T::zero() {
        return Ok(T::zero());
    }
    Ok((T::one() + beta_sq) * precision * recall / denom)
}

/// E-measure: enhanced alignment between the adaptively binarized
/// prediction and the ground truth.
pub fn e_measure<T: Real>(pred: &Map<T>, gt: &Mask) -> Result<T> {
    gt.same_shape(pred.height(), pred.width())?;
    let binary = adaptive_binarize(pred);
    let n = T::from_count(binary.len());
    let gt_ones = gt.count_ones();

    // Degenerate ground truths score by plain agreement.
    if gt_ones == 0 {
        let agree = binary.iter().filter(|&&b| !b).count();
        return Ok(T::from_count(agree) / n);
    }
    if gt_ones == binary.len() {
        let agree = binary.iter().filter(|&&b| b).count();
        return Ok(T::from_count(agree) / n);
    }

    let mean_g = T::from_count(gt_ones) / n;
    let mean_b = T::from_count(binary.iter().filter(|&&b| b).count()) / n;
    let eps = T::from_f64_c(E_EPS);
    let quarter = T::from_f64_c(0.25);
    let mut sum = T::zero();
    for (&b, &g) in binary.iter().zip(gt.data()) {
        let phi_g = T::from_count(g as usize) - mean_g;
        let phi_b = T::from_count(b as usize) - mean_b;
        let align = T::from_f64_c(2.0) * phi_g * phi_b / (phi_g * phi_g + phi_b * phi_b + eps);
        let enhanced = quarter * (T::one() + align) * (T::one() + align);
        sum += enhanced;
    }
    Ok(sum / n)
}

/// Metric triple for a single pair or a corpus average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport<T> {
    pub mae: T,
    pub f_ave: T,
    pub e_m: T,
    pub n_images: usize,
}

/// All three metrics for one prediction/ground-truth pair.
pub fn evaluate_pair<T: Real>(pred: &Map<T>, gt: &Mask) -> Result<MetricReport<T>> {
    Ok(MetricReport {
        mae: mae(pred, gt)?,
        f_ave: f_measure_adaptive(pred, gt)?,
        e_m: e_measure(pred, gt)?,
        n_images: 1,
    })
}

/// Arithmetic mean of per-image metrics over a corpus.
pub fn evaluate_corpus<T: Real>(pairs: &[(Map<T>, Mask)]) -> Result<MetricReport<T>> {
    if pairs.is_empty() {
        return Err(crate::error::Error::EmptyInput);
    }
    let mut sum_mae = T::zero();
    let mut sum_f = T::zero();
    let mut sum_e = T::zero();
    for (pred, gt) in pairs {
        let r = evaluate_pair(pred, gt)?;
        sum_mae += r.mae;
        sum_f += r.f_ave;
        sum_e += r.e_m;
    }
    let n = T::from_count(pairs.len());
    Ok(MetricReport {
        mae: sum_mae / n,
        f_ave: sum_f / n,
        e_m: sum_e / n,
        n_images: pairs.len(),
    })
}
