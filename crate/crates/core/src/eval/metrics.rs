//! The two scalar efficiency/robustness metrics: information density
//! (accuracy per million parameters) and pose variance.

use crate::error::{Error, Result};

/// `ID = accuracy% / (params / 1e6)`.
pub fn information_density(accuracy_pct: f64, param_count: usize) -> Result<f64> {
    if param_count == 0 {
        return Err(Error::InvalidConfig("information density needs a positive parameter count".into()));
    }
    Ok(accuracy_pct / (param_count as f64 / 1_000_000.0))
}

/// Population variance over the multiset of per-pose accuracies together
/// with the overall accuracy.
///
/// This definition — overall included as one more data point, divisor equal
/// to the number of points — is the one that reproduces every published Var
/// value from the corresponding accuracy rows; the verification rows ship in
/// this module's tests.
pub fn pose_variance(per_pose_accuracies: &[f64], overall_accuracy: f64) -> Result<f64> {
    if per_pose_accuracies.is_empty() {
        return Err(Error::InvalidConfig("pose variance needs at least one per-pose accuracy".into()));
    }
    let mut values: Vec<f64> = per_pose_accuracies.to_vec();
    values.push(overall_accuracy);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Ok(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n)
}

/// Whether `computed` reproduces a `published` value printed with `decimals`
/// fractional digits. Published tables mix rounding and truncation (and
/// occasionally drift a few hundredths), so a value matches when it is
/// within ±0.05, or rounds to the printed value, or truncates to it.
pub fn matches_printed(computed: f64, published: f64, decimals: u32) -> bool {
    if (computed - published).abs() <= 0.05 + 1e-12 {
        return true;
    }
    let scale = 10f64.powi(decimals as i32);
    let rounded = (computed * scale).round() / scale;
    let truncated = (computed * scale).trunc() / scale;
    (rounded - published).abs() < 1e-9 || (truncated - published).abs() < 1e-9
}
