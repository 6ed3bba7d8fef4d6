//! Binomial confidence bounds for BER estimates.

/// Wilson score interval for `errors` successes out of `trials` at normal
/// quantile `z`.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if errors == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if errors == trials { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Pooled two-proportion z statistic for `p_a > p_b`.
pub fn two_proportion_z(errors_a: u64, n_a: u64, errors_b: u64, n_b: u64) -> f64 {
    let (na, nb) = (n_a as f64, n_b as f64);
    let pa = errors_a as f64 / na;
    let pb = errors_b as f64 / nb;
    let pooled = (errors_a + errors_b) as f64 / (na + nb);
    let se = (pooled * (1.0 - pooled) * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return 0.0;
    }
    (pa - pb) / se
}

/// One-sided 95% critical value of the standard normal.
pub const Z_ONE_SIDED_95: f64 = 1.644854;

/// `a` has a significantly higher error rate than `b`.
pub fn significantly_greater(errors_a: u64, n_a: u64, errors_b: u64, n_b: u64) -> bool {
    two_proportion_z(errors_a, n_a, errors_b, n_b) > Z_ONE_SIDED_95
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wilson_reference_values() {
        // 10/100 at 95%: [0.05523, 0.17437].
        let (lo, hi) = wilson_interval(10, 100, 1.959964);
        assert_abs_diff_eq!(lo, 0.05523, epsilon = 1e-5);
        assert_abs_diff_eq!(hi, 0.17437, epsilon = 1e-5);
        let (lo, hi) = wilson_interval(0, 1000, 1.959964);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.004);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn z_test() {
        assert!(significantly_greater(200, 10_000, 100, 10_000));
        assert!(!significantly_greater(105, 10_000, 100, 10_000));
        assert!(!significantly_greater(0, 100, 0, 100));
        assert!(two_proportion_z(100, 10_000, 200, 10_000) < -Z_ONE_SIDED_95);
    }
}
