use crate::error::{Error, Result};
use crate::scalar::Real;

/// Least-squares parabola `y ≈ a·x² + b·x + c` with the correlation
/// coefficient `R = sqrt(1 − SS_res/SS_tot)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFit<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub r: T,
}

impl<T: Real> QuadFit<T> {
    pub fn eval(&self, x: T) -> T {
        (self.a * x + self.b) * x + self.c
    }
}

/// Degree-2 least squares by Householder QR on a centred and scaled
/// Vandermonde matrix.
pub fn polyfit2<T: Real>(xs: &[T], ys: &[T]) -> Result<QuadFit<T>> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            what: "polyfit2 ordinates",
            expected: xs.len(),
            actual: ys.len(),
        });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    let mut distinct: Vec<T> = xs.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 distinct abscissae, got {}",
            distinct.len()
        )));
    }

    let n = xs.len();
    let nf = T::from_count(n);
    let mean = xs.iter().copied().sum::<T>() / nf;
    let scale = xs.iter().fold(T::zero(), |m, &x| m.max((x - mean).abs()));

    // Column-major n×3 design matrix in u = (x − mean)/scale.
    let mut a = vec![T::zero(); 3 * n];
    for (i, &x) in xs.iter().enumerate() {
        let u = (x - mean) / scale;
        a[i] = T::one();
        a[n + i] = u;
        a[2 * n + i] = u * u;
    }
    let mut rhs = ys.to_vec();

    for k in 0..3 {
        let col = &a[k * n..(k + 1) * n];
        let norm = col[k..].iter().map(|v| *v * *v).sum::<T>().sqrt();
        if norm == T::zero() {
            return Err(Error::Fit("rank-deficient design matrix".into()));
        }
        let alpha = if col[k] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = col[k..].to_vec();
        v[0] = v[0] - alpha;
        let vnorm2 = v.iter().map(|x| *x * *x).sum::<T>();
        if vnorm2 > T::zero() {
            for j in k..3 {
                let c = &mut a[j * n + k..(j + 1) * n];
                let dot = v.iter().zip(c.iter()).map(|(p, q)| *p * *q).sum::<T>();
                let f = T::lit(2.0) * dot / vnorm2;
                for (ci, vi) in c.iter_mut().zip(&v) {
                    *ci = *ci - f * *vi;
                }
            }
            let dot = v.iter().zip(&rhs[k..]).map(|(p, q)| *p * *q).sum::<T>();
            let f = T::lit(2.0) * dot / vnorm2;
            for (ri, vi) in rhs[k..].iter_mut().zip(&v) {
                *ri = *ri - f * *vi;
            }
        }
    }

    let r = |i: usize, j: usize| a[j * n + i];
    let diag_max = (0..3).fold(T::zero(), |m, i| m.max(r(i, i).abs()));
    let tol = diag_max * T::from_count(n) * T::epsilon() * T::lit(16.0);
    if (0..3).any(|i| r(i, i).abs() <= tol) {
        return Err(Error::Fit("rank-deficient design matrix".into()));
    }
    let p2 = rhs[2] / r(2, 2);
    let p1 = (rhs[1] - r(1, 2) * p2) / r(1, 1);
    let p0 = (rhs[0] - r(0, 1) * p1 - r(0, 2) * p2) / r(0, 0);

    let s2 = scale * scale;
    let fit_a = p2 / s2;
    let fit_b = p1 / scale - T::lit(2.0) * mean * p2 / s2;
    let fit_c = p0 - p1 * mean / scale + p2 * mean * mean / s2;

    // Residual sum of squares is the tail of the rotated right-hand side.
    let ss_res = rhs[3..].iter().map(|v| *v * *v).sum::<T>();
    let y_mean = ys.iter().copied().sum::<T>() / nf;
    let ss_tot = ys.iter().map(|y| (*y - y_mean) * (*y - y_mean)).sum::<T>();
    let r_coef = if ss_tot > T::zero() {
        (T::one() - ss_res / ss_tot).max(T::zero()).sqrt()
    } else {
        T::one()
    };

    Ok(QuadFit {
        a: fit_a,
        b: fit_b,
        c: fit_c,
        r: r_coef,
    })
}

/// Ordinary least-squares straight line `y ≈ slope·x + intercept`.
pub(crate) fn linear_fit<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::from_count(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::led::MULTICOMP_1W_TABLE;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_parabola() {
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.3 - 1.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x * x - x + 3.0).collect();
        let f = polyfit2(&xs, &ys).unwrap();
        assert_abs_diff_eq!(f.a, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.b, -1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.c, 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(f.r, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn led_row_round_trip() {
        let row = MULTICOMP_1W_TABLE.iter().find(|r| r.0 == 30.0).unwrap();
        let xs: Vec<f64> = (0..50).map(|i| 0.35 * i as f64 / 49.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| row.1 * x * x + row.2 * x + row.3).collect();
        let f = polyfit2(&xs, &ys).unwrap();
        assert_abs_diff_eq!(f.a, -0.22566, epsilon = 1e-9);
        assert_abs_diff_eq!(f.b, 0.742316, epsilon = 1e-9);
        assert_abs_diff_eq!(f.c, 0.008848, epsilon = 1e-9);
    }

    #[test]
    fn noisy_line_matches_simple_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (0..400).map(|i| i as f64 / 40.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 1.5 * x - 2.0 + 0.3 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let f = polyfit2(&xs, &ys).unwrap();
        let (m, q) = linear_fit(&xs, &ys);
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
        let ss_lin: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - m * x - q).powi(2)).sum();
        let r_lin = (1.0 - ss_lin / ss_tot).sqrt();
        assert!(f.a.abs() < 0.01);
        assert!(f.r >= r_lin && f.r - r_lin < 1e-3);
    }

    #[test]
    fn near_collinear_abscissae() {
        // Narrow cluster far from the origin defeats the normal equations.
        let xs: Vec<f64> = (0..20).map(|i| 1e4 + i as f64 * 1e-3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 * (x - 1e4) * (x - 1e4) + 2.0).collect();
        let f = polyfit2(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_abs_diff_eq!(f.eval(*x), *y, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(polyfit2(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(polyfit2(&[1.0, 1.0, 2.0, 2.0], &[1.0, 1.0, 2.0, 2.0]).is_err());
        assert!(polyfit2(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
        assert!(polyfit2(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn f32_fit() {
        let xs: Vec<f32> = (0..20).map(|i| i as f32 / 19.0).collect();
        let ys: Vec<f32> = xs.iter().map(|x| -0.25 * x * x + 0.7 * x + 0.01).collect();
        let f = polyfit2(&xs, &ys).unwrap();
        assert!((f.a + 0.25).abs() < 1e-4 && (f.b - 0.7).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn recovers_random_parabolas(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
                                     x0 in -10.0f64..10.0, w in 0.1f64..10.0) {
            let xs: Vec<f64> = (0..16).map(|i| x0 + w * i as f64 / 15.0).collect();
            let ys: Vec<f64> = xs.iter().map(|x| a * x * x + b * x + c).collect();
            let f = polyfit2(&xs, &ys).unwrap();
            for (x, y) in xs.iter().zip(&ys) {
                prop_assert!((f.eval(*x) - y).abs() < 1e-8 * (1.0 + y.abs()));
            }
        }
    }
}
