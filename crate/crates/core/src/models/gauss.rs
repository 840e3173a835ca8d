use std::f64::consts::PI;

pub(crate) const LN_2PI: f64 = 1.8378770664093453;

/// Log density of `N(mean, var)` at `x`.
#[inline]
pub(crate) fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * PI * var).ln() + d * d / var)
}
