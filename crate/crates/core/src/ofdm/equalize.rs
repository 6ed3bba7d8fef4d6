use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-subcarrier ZF correction estimated from known pilot frames.
#[derive(Debug, Clone, PartialEq)]
pub struct ZfPostEqualizer<T> {
    correction: Vec<Complex<T>>,
}

impl<T: Real> ZfPostEqualizer<T> {
    /// Channel estimate averaged over pilot frames, then inverted.
    /// Errors list every subcarrier with a zero average estimate.
    pub fn from_pilots(received: &[Vec<Complex<T>>], known: &[Vec<Complex<T>>]) -> Result<Self> {
        if received.is_empty() || received.len() != known.len() {
            return Err(Error::LengthMismatch {
                what: "pilot frames",
                expected: known.len().max(1),
                actual: received.len(),
            });
        }
        let width = known[0].len();
        let mut h = vec![Complex::new(T::zero(), T::zero()); width];
        for (rx, tx) in received.iter().zip(known) {
            if rx.len() != width || tx.len() != width {
                return Err(Error::LengthMismatch {
                    what: "pilot symbols",
                    expected: width,
                    actual: rx.len().min(tx.len()),
                });
            }
            for ((acc, r), x) in h.iter_mut().zip(rx).zip(tx) {
                if x.norm_sqr() == T::zero() {
                    return Err(Error::domain("known pilot", "pilot symbol is zero".to_string()));
                }
                *acc = *acc + r / x;
            }
        }
        let frames = T::from_count(received.len());
        let bad: Vec<usize> = h
            .iter()
            .enumerate()
            .filter(|(_, v)| !(v.norm_sqr() > T::zero()) || !v.re.is_finite() || !v.im.is_finite())
            .map(|(i, _)| i)
            .collect();
        if !bad.is_empty() {
            return Err(Error::Unequalizable { bins: bad });
        }
        Ok(Self {
            correction: h.into_iter().map(|v| Complex::new(frames, T::zero()) / v).collect(),
        })
    }

    pub fn correction(&self) -> &[Complex<T>] {
        &self.correction
    }

    pub fn apply(&self, received: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        if received.len() != self.correction.len() {
            return Err(Error::LengthMismatch {
                what: "received symbols",
                expected: self.correction.len(),
                actual: received.len(),
            });
        }
        Ok(received.iter().zip(&self.correction).map(|(y, c)| y * c).collect())
    }
}

/// Single-pilot ZF: `received · pilot_known / pilot_received`.
pub fn post_equalize<T: Real>(
    received: &[Complex<T>],
    pilot_received: &[Complex<T>],
    pilot_known: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    ZfPostEqualizer::from_pilots(&[pilot_received.to_vec()], &[pilot_known.to_vec()])?.apply(received)
}
