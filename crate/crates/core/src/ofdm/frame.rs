use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{OfdmConfig, Qam};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Real-valued time-domain frame with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrame<T> {
    pub samples: Vec<T>,
    pub sample_rate_hz: T,
}

impl<T: Real> TimeFrame<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Planned N-point transform pair wrapped to the `1/N`-on-inverse convention.
#[derive(Clone)]
pub struct OfdmTransform<T: Real> {
    n: usize,
    fwd: Arc<dyn Fft<T>>,
    inv: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for OfdmTransform<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmTransform").field("n", &self.n).finish()
    }
}

impl<T: Real> OfdmTransform<T> {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Inverse DFT of a Hermitian-symmetric spectrum, scaled by `1/N`.
    pub fn inverse_real(&self, x: &[Complex<T>]) -> Result<Vec<T>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "IDFT input",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut buf = x.to_vec();
        self.inv.process(&mut buf);
        let scale = T::one() / T::from_count(self.n);
        let mut peak = T::one();
        let mut residue = T::zero();
        for v in &mut buf {
            *v = *v * scale;
            peak = peak.max(v.re.abs());
            residue = residue.max(v.im.abs());
        }
        let tol = T::lit(1e-9).max(T::lit(64.0) * T::epsilon()) * peak;
        if residue > tol {
            return Err(Error::domain(
                "IDFT input",
                format!("spectrum is not Hermitian (imaginary residue {residue:e})"),
            ));
        }
        Ok(buf.into_iter().map(|v| v.re).collect())
    }

    /// Unscaled forward DFT of real samples.
    pub fn forward_real(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                what: "DFT input",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fwd.process(&mut buf);
        Ok(buf)
    }
}

/// Places data on bins `n_suppressed+1 .. N/2−1` and mirrors the conjugates
/// onto the upper half. DC, Nyquist and suppressed bins are zero.
pub fn hermitian_map<T: Real>(
    data: &[Complex<T>],
    n_fft: usize,
    n_suppressed: usize,
) -> Result<Vec<Complex<T>>> {
    let half = n_fft / 2;
    let expected = half.saturating_sub(1 + n_suppressed);
    if n_fft < 4 || data.len() != expected {
        return Err(Error::LengthMismatch {
            what: "data symbols per frame",
            expected,
            actual: data.len(),
        });
    }
    let mut x = vec![Complex::new(T::zero(), T::zero()); n_fft];
    for (i, &s) in data.iter().enumerate() {
        let k = n_suppressed + 1 + i;
        x[k] = s;
        x[n_fft - k] = s.conj();
    }
    Ok(x)
}

pub fn apply_subcarrier_gains<T: Real>(
    x_h: &[Complex<T>],
    gains: &[Complex<T>],
) -> Result<Vec<Complex<T>>> {
    if x_h.len() != gains.len() {
        return Err(Error::LengthMismatch {
            what: "subcarrier gains",
            expected: x_h.len(),
            actual: gains.len(),
        });
    }
    Ok(x_h.iter().zip(gains).map(|(a, b)| a * b).collect())
}

pub fn idft_frame<T: Real>(x: &[Complex<T>]) -> Result<Vec<T>> {
    OfdmTransform::new(x.len()).inverse_real(x)
}

pub fn prepend_cp<T: Real>(samples: &[T], n_cp: usize, sample_rate_hz: T) -> Result<TimeFrame<T>> {
    if n_cp > samples.len() {
        return Err(Error::domain(
            "cyclic prefix",
            format!("n_cp = {n_cp} exceeds frame length {}", samples.len()),
        ));
    }
    let mut out = Vec::with_capacity(samples.len() + n_cp);
    out.extend_from_slice(&samples[samples.len() - n_cp..]);
    out.extend_from_slice(samples);
    Ok(TimeFrame {
        samples: out,
        sample_rate_hz,
    })
}

pub fn hard_clip<T: Real>(frame: &TimeFrame<T>, clip_lo: T, clip_hi: T) -> Result<TimeFrame<T>> {
    if !(clip_lo < clip_hi) {
        return Err(Error::domain(
            "clip limits",
            format!("clip_lo ({clip_lo}) must be below clip_hi ({clip_hi})"),
        ));
    }
    Ok(TimeFrame {
        samples: frame
            .samples
            .iter()
            .map(|&u| {
                if u > clip_hi {
                    clip_hi
                } else if u < clip_lo {
                    clip_lo
                } else {
                    u
                }
            })
            .collect(),
        sample_rate_hz: frame.sample_rate_hz,
    })
}

pub fn sigma_from_clip_factor<T: Real>(config: &OfdmConfig<T>) -> T {
    config.sigma_x()
}

/// Strips the cyclic prefix and returns the full N-point spectrum.
pub fn dft_receive<T: Real>(frame: &TimeFrame<T>, config: &OfdmConfig<T>) -> Result<Vec<Complex<T>>> {
    let expected = config.n_fft + config.n_cp;
    if frame.len() != expected {
        return Err(Error::LengthMismatch {
            what: "received frame",
            expected,
            actual: frame.len(),
        });
    }
    OfdmTransform::new(config.n_fft).forward_real(&frame.samples[config.n_cp..])
}

/// Active data bins of a full spectrum.
pub fn extract_data<T: Real>(spectrum: &[Complex<T>], config: &OfdmConfig<T>) -> Result<Vec<Complex<T>>> {
    if spectrum.len() != config.n_fft {
        return Err(Error::LengthMismatch {
            what: "spectrum",
            expected: config.n_fft,
            actual: spectrum.len(),
        });
    }
    Ok(spectrum[config.active_bins()].to_vec())
}

/// Transmitter and receiver sharing one planned transform.
#[derive(Debug, Clone)]
pub struct Modem<T: Real> {
    config: OfdmConfig<T>,
    qam: Qam,
    transform: OfdmTransform<T>,
}

impl<T: Real> Modem<T> {
    pub fn new(config: OfdmConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            qam: Qam::new(config.mod_order)?,
            transform: OfdmTransform::new(config.n_fft),
            config,
        })
    }

    pub fn config(&self) -> &OfdmConfig<T> {
        &self.config
    }

    pub fn qam(&self) -> &Qam {
        &self.qam
    }

    pub fn transform(&self) -> &OfdmTransform<T> {
        &self.transform
    }

    /// Unclipped time samples (with CP) of one frame of data symbols.
    pub fn modulate_unclipped(&self, data: &[Complex<T>], gains: &[Complex<T>]) -> Result<TimeFrame<T>> {
        let c = &self.config;
        let x_h = hermitian_map(data, c.n_fft, c.n_suppressed)?;
        let x = apply_subcarrier_gains(&x_h, gains)?;
        let u = self.transform.inverse_real(&x)?;
        prepend_cp(&u, c.n_cp, c.sample_rate_hz())
    }

    /// Modulation current frame: gains, IDFT, CP, hard clip.
    pub fn modulate(&self, data: &[Complex<T>], gains: &[Complex<T>]) -> Result<TimeFrame<T>> {
        let u = self.modulate_unclipped(data, gains)?;
        hard_clip(&u, self.config.clip_lo, self.config.clip_hi)
    }

    pub fn spectrum(&self, frame: &[T]) -> Result<Vec<Complex<T>>> {
        let c = &self.config;
        if frame.len() != c.n_fft + c.n_cp {
            return Err(Error::LengthMismatch {
                what: "received frame",
                expected: c.n_fft + c.n_cp,
                actual: frame.len(),
            });
        }
        self.transform.forward_real(&frame[c.n_cp..])
    }

    /// Received active-bin symbols of one frame.
    pub fn demodulate(&self, frame: &[T]) -> Result<Vec<Complex<T>>> {
        Ok(self.spectrum(frame)?[self.config.active_bins()].to_vec())
    }
}
