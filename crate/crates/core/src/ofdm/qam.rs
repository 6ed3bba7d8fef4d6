//! Gray-coded square M-QAM on the odd-integer grid `{±1, ±3, …}` per axis.
//!
//! Each symbol carries `log2(M)` bits: the in-phase bits first, then the
//! quadrature bits, most significant first. Average symbol energy is
//! `2(M−1)/3`.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Qam {
    order: usize,
    side: usize,
    bits_per_axis: usize,
}

impl Qam {
    pub fn new(order: usize) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || bits % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "QAM order must be a power of 4 (4, 16, 64, 256, ...), got {order}"
            )));
        }
        Ok(Self {
            order,
            side: 1 << (bits / 2),
            bits_per_axis: bits / 2,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    pub fn mean_energy(&self) -> f64 {
        2.0 * (self.order as f64 - 1.0) / 3.0
    }

    fn level<T: Real>(&self, index: usize) -> T {
        T::from_count(2 * index) - T::from_count(self.side - 1)
    }

    fn axis_bits_to_index(&self, bits: &[u8]) -> usize {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        // Gray → binary.
        let mut index = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            index ^= shift;
            shift >>= 1;
        }
        index
    }

    fn push_axis_bits(&self, index: usize, out: &mut Vec<u8>) {
        let gray = index ^ (index >> 1);
        for k in (0..self.bits_per_axis).rev() {
            out.push(((gray >> k) & 1) as u8);
        }
    }

    /// Nearest level index on one axis; a value exactly between two levels
    /// resolves to the lower index.
    fn decide<T: Real>(&self, y: T) -> usize {
        let half = T::lit(0.5);
        let t = (y + T::from_count(self.side - 1)) * half;
        let i = (t - half).ceil();
        if !(i > T::zero()) {
            0
        } else {
            i.to_usize().unwrap_or(self.side - 1).min(self.side - 1)
        }
    }

    pub fn modulate<T: Real>(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        let k = self.bits_per_symbol();
        if bits.len() % k != 0 {
            return Err(Error::LengthMismatch {
                what: "QAM bit stream (multiple of log2 M)",
                expected: bits.len().div_ceil(k) * k,
                actual: bits.len(),
            });
        }
        Ok(bits
            .chunks_exact(k)
            .map(|sym| {
                let (i_bits, q_bits) = sym.split_at(self.bits_per_axis);
                Complex::new(
                    self.level(self.axis_bits_to_index(i_bits)),
                    self.level(self.axis_bits_to_index(q_bits)),
                )
            })
            .collect())
    }

    /// Minimum-distance hard decision back to bits.
    pub fn demodulate<T: Real>(&self, symbols: &[Complex<T>]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.push_axis_bits(self.decide(s.re), &mut out);
            self.push_axis_bits(self.decide(s.im), &mut out);
        }
        out
    }

    /// Hard decision to the nearest constellation point.
    pub fn slice<T: Real>(&self, s: Complex<T>) -> Complex<T> {
        Complex::new(self.level(self.decide(s.re)), self.level(self.decide(s.im)))
    }
}

pub fn qam_modulate<T: Real>(bits: &[u8], m: usize) -> Result<Vec<Complex<T>>> {
    Qam::new(m)?.modulate(bits)
}

pub fn qam_demodulate<T: Real>(symbols: &[Complex<T>], m: usize) -> Result<Vec<u8>> {
    Ok(Qam::new(m)?.demodulate(symbols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qpsk_gray_sequence() {
        let pts: Vec<Complex<f64>> = qam_modulate(&[0, 0, 0, 1, 1, 1, 1, 0], 4).unwrap();
        assert_eq!(
            pts,
            vec![
                Complex::new(-1.0, -1.0),
                Complex::new(-1.0, 1.0),
                Complex::new(1.0, 1.0),
                Complex::new(1.0, -1.0)
            ]
        );
        // Consecutive points differ by one bit and are nearest neighbours.
        for w in pts.windows(2) {
            assert_eq!((w[0] - w[1]).norm_sqr(), 4.0);
        }
    }

    #[test]
    fn average_energy_matches_closed_form() {
        for m in [4usize, 16, 64, 256] {
            let q = Qam::new(m).unwrap();
            let k = q.bits_per_symbol();
            let bits: Vec<u8> = (0..m)
                .flat_map(|s| (0..k).rev().map(move |b| ((s >> b) & 1) as u8))
                .collect();
            let pts: Vec<Complex<f64>> = q.modulate(&bits).unwrap();
            let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / m as f64;
            assert_eq!(e, 2.0 * (m as f64 - 1.0) / 3.0);
            assert_eq!(e, q.mean_energy());
        }
        assert_eq!(Qam::new(16).unwrap().mean_energy(), 10.0);
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        let q = Qam::new(64).unwrap();
        for i in 0..7 {
            let mut a = Vec::new();
            let mut b = Vec::new();
            q.push_axis_bits(i, &mut a);
            q.push_axis_bits(i + 1, &mut b);
            assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
        }
    }

    #[test]
    fn decisions() {
        let q = Qam::new(4).unwrap();
        assert_eq!(q.demodulate(&[Complex::new(1.1, 0.9)]), vec![1, 1]);
        // Origin is equidistant from all four points: lower index wins on both axes.
        assert_eq!(q.demodulate(&[Complex::new(0.0f64, 0.0)]), vec![0, 0]);
        let q16 = Qam::new(16).unwrap();
        assert_eq!(q16.slice(Complex::new(2.0f64, -2.0)), Complex::new(1.0, -3.0));
        assert_eq!(q16.slice(Complex::new(9.0f64, -9.0)), Complex::new(3.0, -3.0));
    }

    #[test]
    fn rejects_bad_orders_and_lengths() {
        for m in [0, 1, 2, 8, 32, 12] {
            assert!(Qam::new(m).is_err(), "{m}");
        }
        assert!(qam_modulate::<f64>(&[0, 1, 1], 16).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(bits in proptest::collection::vec(0u8..2, 0..64), mi in 0usize..4) {
            let m = [4usize, 16, 64, 256][mi];
            let k = Qam::new(m).unwrap().bits_per_symbol();
            let bits = &bits[..bits.len() / k * k];
            let pts: Vec<Complex<f64>> = qam_modulate(bits, m).unwrap();
            prop_assert_eq!(qam_demodulate(&pts, m).unwrap(), bits.to_vec());
        }

        #[test]
        fn slicing_is_nearest_point(re in -20.0f64..20.0, im in -20.0f64..20.0) {
            let q = Qam::new(64).unwrap();
            let s = Complex::new(re, im);
            let d = (q.slice(s) - s).norm_sqr();
            for a in (-7..=7).step_by(2) {
                for b in (-7..=7).step_by(2) {
                    prop_assert!(d <= (Complex::new(a as f64, b as f64) - s).norm_sqr() + 1e-12);
                }
            }
        }
    }
}
