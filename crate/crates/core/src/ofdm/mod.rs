//! DCO-OFDM baseband: QAM mapping, Hermitian symmetry, subcarrier gains,
//! IDFT/DFT with cyclic prefix, hard clipping and ZF post-equalization.
//!
//! Transform convention: the inverse DFT carries the `1/N` factor and the
//! forward DFT none, so the time-domain variance of a frame is
//! `(1/N²)·Σ|X[k]|²`.

mod equalize;
mod frame;
mod qam;

pub use equalize::{post_equalize, ZfPostEqualizer};
pub use frame::{
    apply_subcarrier_gains, dft_receive, extract_data, hard_clip, hermitian_map, idft_frame,
    prepend_cp, sigma_from_clip_factor, Modem, OfdmTransform, TimeFrame,
};
pub use qam::{qam_demodulate, qam_modulate, Qam};

use std::ops::Range;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Frame parameters shared by transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmConfig<T> {
    /// IDFT size N, a power of two.
    pub n_fft: usize,
    /// Cyclic prefix length in samples.
    pub n_cp: usize,
    /// QAM order M, a power of 4.
    pub mod_order: usize,
    /// Upper modulation current limit I_u, A.
    pub clip_hi: T,
    /// Lower modulation current limit I_l, A.
    pub clip_lo: T,
    /// Clipping factor γ: standard deviations per half of the dynamic range.
    pub clip_factor: T,
    /// Low-frequency data subcarriers switched off above DC (0 = none).
    pub n_suppressed: usize,
    /// Occupied bandwidth; the Nyquist bin N/2 sits at this frequency.
    pub bandwidth_hz: T,
}

impl<T: Real> Default for OfdmConfig<T> {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            n_cp: 16,
            mod_order: 16,
            clip_hi: T::lit(0.15),
            clip_lo: T::lit(-0.15),
            clip_factor: T::lit(5.0),
            n_suppressed: 0,
            bandwidth_hz: T::lit(5e6),
        }
    }
}

impl<T: Real> OfdmConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let n = self.n_fft;
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "n_fft must be a power of two >= 4, got {n}"
            )));
        }
        if self.n_cp > n {
            return Err(Error::InvalidConfig("n_cp cannot exceed n_fft".into()));
        }
        Qam::new(self.mod_order)?;
        if !(self.clip_lo < self.clip_hi) {
            return Err(Error::InvalidConfig(format!(
                "clip_lo ({}) must be below clip_hi ({})",
                self.clip_lo, self.clip_hi
            )));
        }
        if !(self.clip_factor > T::zero()) {
            return Err(Error::InvalidConfig("clip_factor must be > 0".into()));
        }
        if self.n_suppressed + 1 >= n / 2 {
            return Err(Error::InvalidConfig(format!(
                "n_suppressed = {} leaves no active subcarrier",
                self.n_suppressed
            )));
        }
        if !(self.bandwidth_hz > T::zero()) {
            return Err(Error::InvalidConfig("bandwidth_hz must be > 0".into()));
        }
        Ok(())
    }

    /// Time-domain standard deviation σ_x implied by γ and the clip limits.
    pub fn sigma_x(&self) -> T {
        (self.clip_hi - self.clip_lo) / (T::lit(2.0) * self.clip_factor)
    }

    /// Data-bearing bins of the lower half-spectrum.
    pub fn active_bins(&self) -> Range<usize> {
        (self.n_suppressed + 1)..(self.n_fft / 2)
    }

    pub fn n_active(&self) -> usize {
        self.n_fft / 2 - 1 - self.n_suppressed
    }

    /// Excluded bins per half-spectrum, counting the null DC bin.
    pub fn excluded_per_half(&self) -> usize {
        self.n_suppressed + 1
    }

    pub fn sample_rate_hz(&self) -> T {
        T::lit(2.0) * self.bandwidth_hz
    }

    /// Centre frequency of DFT bin `k` (0 ≤ k ≤ N/2).
    pub fn bin_frequency(&self, k: usize) -> T {
        self.sample_rate_hz() * T::from_count(k) / T::from_count(self.n_fft)
    }

    pub fn bits_per_frame(&self) -> usize {
        self.n_active() * Qam::new(self.mod_order).map(|q| q.bits_per_symbol()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_is_valid() {
        let c = OfdmConfig::<f64>::default();
        c.validate().unwrap();
        assert_eq!(c.n_active(), 511);
        assert_eq!(c.active_bins(), 1..512);
        assert_eq!(c.bin_frequency(512), 5e6);
    }

    #[test]
    fn sigma_from_reference_limits() {
        let c = OfdmConfig::<f64>::default();
        assert_eq!(c.sigma_x(), 0.03);
    }

    #[test]
    fn invalid_configs() {
        let base = OfdmConfig::<f64>::default();
        for bad in [
            OfdmConfig { n_fft: 1000, ..base },
            OfdmConfig { mod_order: 8, ..base },
            OfdmConfig { clip_lo: 0.2, ..base },
            OfdmConfig { n_suppressed: 511, ..base },
            OfdmConfig { clip_factor: 0.0, ..base },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }
}
