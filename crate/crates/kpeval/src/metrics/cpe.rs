//! Combined performance evaluation.
//!
//! Folds the mean torso-relative error (in percent) and the missing-data
//! percentage into one value in [0, 1] via the clamped rescaling
//! `f(x) = 1 - min(1, x / (c * 100))` and averages the two. The default
//! coefficient c = 0.5 treats errors above half the torso length, or more
//! than half the data missing, as unusable.

use serde::Serialize;

pub const DEFAULT_CPE_COEFFICIENT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpeResult {
    pub cpe: f64,
    pub f_nmh: f64,
    pub f_missing: f64,
    pub c: f64,
}

fn rescale(x: f64, c: f64) -> f64 {
    1.0 - (x / (c * 100.0)).min(1.0)
}

/// Combine a mean torso-relative error and a missing-data percentage.
pub fn cpe(nmh_mean_percent: f64, missing_percent: f64, c: f64) -> CpeResult {
    assert!(c > 0.0, "coefficient must be positive");
    debug_assert!(nmh_mean_percent >= 0.0 && missing_percent >= 0.0);
    let f_nmh = rescale(nmh_mean_percent, c);
    let f_missing = rescale(missing_percent, c);
    CpeResult {
        cpe: (f_nmh + f_missing) / 2.0,
        f_nmh,
        f_missing,
        c,
    }
}
