//! Per-subcarrier gain vectors: constant gains for a flat channel and
//! zero-forcing pre-equalization gains estimated from the feedback
//! photodiode.

use std::io::Write;

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::ofdm::{Modem, OfdmConfig, TimeFrame};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainMode {
    Flat,
    ZeroForcing,
}

/// Complex gains aligned to the N DFT bins. DC, Nyquist, suppressed and
/// excluded bins hold zero; the upper half mirrors the lower half.
#[derive(Debug, Clone, PartialEq)]
pub struct GainVector<T> {
    gains: Vec<Complex<T>>,
    /// Scaling factor used to build the gains.
    pub scale: T,
    pub mode: GainMode,
    /// Active bins dropped because the feedback was too weak to invert.
    pub excluded: Vec<usize>,
    /// Set when the post-check had to scale the gains down.
    pub rescaled: bool,
}

impl<T: Real> GainVector<T> {
    /// `|G|_flat` on every active bin.
    pub fn flat(config: &OfdmConfig<T>) -> Result<Self> {
        let g = flat_gain(config)?;
        let mut gains = vec![Complex::new(T::zero(), T::zero()); config.n_fft];
        for k in config.active_bins() {
            gains[k] = Complex::new(g, T::zero());
            gains[config.n_fft - k] = Complex::new(g, T::zero());
        }
        Ok(Self {
            gains,
            scale: g,
            mode: GainMode::Flat,
            excluded: Vec::new(),
            rescaled: false,
        })
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Expected time-domain variance of frames built with these gains and
    /// M-QAM symbols of mean energy `2(M−1)/3`.
    pub fn expected_variance(&self, mod_order: usize) -> T {
        let n = T::from_count(self.gains.len());
        let es = T::lit(2.0 * (mod_order as f64 - 1.0) / 3.0);
        self.gains.iter().map(|g| g.norm_sqr()).sum::<T>() * es / (n * n)
    }

    /// `bin,re,im` for every bin.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let wrap = |e| Error::csv("<gain vector>", e);
        w.write_record(["bin", "re", "im"]).map_err(wrap)?;
        for (k, g) in self.gains.iter().enumerate() {
            w.write_record([k.to_string(), format!("{:e}", g.re), format!("{:e}", g.im)])
                .map_err(wrap)?;
        }
        w.flush().map_err(|e| Error::io("<gain vector>", e))
    }
}

/// `|G|_flat = sqrt(3σ²N² / (2(N−2)(M−1)))`: the constant gain that gives
/// the frame the target variance σ² when every data bin is active.
pub fn flat_gain<T: Real>(config: &OfdmConfig<T>) -> Result<T> {
    if config.n_fft <= 2 {
        return Err(Error::domain("n_fft", format!("must exceed 2, got {}", config.n_fft)));
    }
    if config.mod_order < 4 {
        return Err(Error::domain("mod_order", format!("must be >= 4, got {}", config.mod_order)));
    }
    Ok(power_budget(config, config.n_fft - 2).sqrt())
}

/// `3σ²N² / (2·n_bins·(M−1))` where `n_bins` counts both halves.
fn power_budget<T: Real>(config: &OfdmConfig<T>, n_bins: usize) -> T {
    let s = config.sigma_x();
    let n = T::from_count(config.n_fft);
    T::lit(3.0) * s * s * n * n
        / (T::lit(2.0) * T::from_count(n_bins) * T::from_count(config.mod_order - 1))
}

/// Feedback channel response over the N DFT bins, normalized by the probe.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackSpectrum<T> {
    values: Vec<Complex<T>>,
}

impl<T: Real> FeedbackSpectrum<T> {
    pub fn new(values: Vec<Complex<T>>) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::domain("feedback spectrum", format!("bin {k} is not finite")));
        }
        Ok(Self { values })
    }

    /// Lower-half values mirrored onto the upper half.
    pub fn from_lower_half(lower: &[Complex<T>], n_fft: usize) -> Result<Self> {
        let mut v = vec![Complex::new(T::zero(), T::zero()); n_fft];
        for (k, &y) in lower.iter().enumerate().take(n_fft / 2).skip(1) {
            v[k] = y;
            v[n_fft - k] = y.conj();
        }
        Self::new(v)
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn mean_square_active(&self, config: &OfdmConfig<T>) -> T {
        let bins = config.active_bins();
        let n = T::from_count(bins.len());
        self.values[bins].iter().map(|v| v.norm_sqr()).sum::<T>() / n
    }
}

/// Default exclusion threshold: bins weaker than this many dB below the
/// median active magnitude are not inverted.
pub const DEFAULT_EPSILON_DB: f64 = 40.0;

pub fn zf_gains<T: Real>(feedback: &FeedbackSpectrum<T>, config: &OfdmConfig<T>) -> Result<GainVector<T>> {
    zf_gains_with_threshold(feedback, config, T::lit(DEFAULT_EPSILON_DB))
}

/// `G = α ⊘ Y_FB` on active bins with `α = sqrt(K / mean(1/|Y_FB|²))` and
/// `K = 3σ²N² / (2(N−2N_s)(M−1))`, so that `E|G|²` over the active bins meets
/// the variance budget for any overall scale of the feedback spectrum.
pub fn zf_gains_with_threshold<T: Real>(
    feedback: &FeedbackSpectrum<T>,
    config: &OfdmConfig<T>,
    epsilon_db: T,
) -> Result<GainVector<T>> {
    config.validate()?;
    let n = config.n_fft;
    let y = feedback.values();
    if y.len() != n {
        return Err(Error::LengthMismatch {
            what: "feedback spectrum",
            expected: n,
            actual: y.len(),
        });
    }
    let mut mags: Vec<T> = y[config.active_bins()].iter().map(|v| v.norm()).collect();
    mags.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = mags[mags.len() / 2];
    if !(median > T::zero()) {
        return Err(Error::domain("feedback spectrum", "no usable energy on active bins"));
    }
    let eps = median * T::lit(10.0).powf(-epsilon_db / T::lit(20.0));

    let (used, excluded): (Vec<usize>, Vec<usize>) =
        config.active_bins().partition(|&k| y[k].norm() > eps);
    if !excluded.is_empty() {
        log::warn!(
            "pre-equalization: {} bin(s) below {:e} left unequalized: {:?}",
            excluded.len(),
            eps,
            excluded
        );
    }
    let inv_ms = used.iter().map(|&k| T::one() / y[k].norm_sqr()).sum::<T>() / T::from_count(used.len());
    let k_budget = power_budget(config, 2 * used.len());
    let mut alpha = (k_budget / inv_ms).sqrt();

    let mut gains = vec![Complex::new(T::zero(), T::zero()); n];
    let fill = |gains: &mut Vec<Complex<T>>, a: T| {
        for &k in &used {
            let g = Complex::new(a, T::zero()) / y[k];
            gains[k] = g;
            gains[n - k] = g.conj();
        }
    };
    fill(&mut gains, alpha);

    let mut out = GainVector {
        gains,
        scale: alpha,
        mode: GainMode::ZeroForcing,
        excluded,
        rescaled: false,
    };
    let target = config.sigma_x() * config.sigma_x();
    let var = out.expected_variance(config.mod_order);
    if var > target * (T::one() + T::lit(1e-9)) {
        alpha = alpha * (target / var).sqrt();
        log::warn!("pre-equalization: scaling factor reduced to {alpha:e} to respect the clip range");
        fill(&mut out.gains, alpha);
        out.scale = alpha;
        out.rescaled = true;
    }
    Ok(out)
}

/// Feedback path as seen from the transmitter: a modulation-current frame
/// in, the sampled feedback signal (same length) out.
pub trait FeedbackLink<T> {
    fn capture(&mut self, frame: &TimeFrame<T>) -> Result<Vec<T>>;
}

impl<T, F> FeedbackLink<T> for F
where
    F: FnMut(&TimeFrame<T>) -> Result<Vec<T>>,
{
    fn capture(&mut self, frame: &TimeFrame<T>) -> Result<Vec<T>> {
        self(frame)
    }
}

/// Transmits `probe_frames` frames of random symbols with flat gains,
/// estimates the feedback response per bin and derives ZF gains.
pub fn run_preeq_protocol<T: Real, L: FeedbackLink<T> + ?Sized, R: Rng + ?Sized>(
    modem: &Modem<T>,
    link: &mut L,
    probe_frames: usize,
    rng: &mut R,
) -> Result<GainVector<T>> {
    let feedback = estimate_feedback(modem, link, probe_frames, rng)?;
    let gains = zf_gains(&feedback, modem.config())?;
    if !gains.excluded.is_empty() {
        return Err(Error::Unequalizable {
            bins: gains.excluded,
        });
    }
    Ok(gains)
}

/// Least-squares estimate `Σ F·X̄ / Σ|X|²` of the probe-normalized feedback
/// response over several flat-gain probe frames.
pub fn estimate_feedback<T: Real, L: FeedbackLink<T> + ?Sized, R: Rng + ?Sized>(
    modem: &Modem<T>,
    link: &mut L,
    probe_frames: usize,
    rng: &mut R,
) -> Result<FeedbackSpectrum<T>> {
    if probe_frames == 0 {
        return Err(Error::InvalidConfig("probe_frames must be >= 1".into()));
    }
    let config = modem.config();
    let flat = GainVector::flat(config)?;
    let g0 = flat.scale;
    let qam = modem.qam();
    let nb = config.n_fft / 2;
    let mut num = vec![Complex::new(T::zero(), T::zero()); nb];
    let mut den = vec![T::zero(); nb];
    for _ in 0..probe_frames {
        let bits: Vec<u8> = (0..config.bits_per_frame()).map(|_| rng.random_range(0..2u8)).collect();
        let data: Vec<Complex<T>> = qam.modulate(&bits)?;
        let frame = modem.modulate(&data, flat.as_slice())?;
        let mut fb = link.capture(&frame)?;
        let mean = fb.iter().copied().sum::<T>() / T::from_count(fb.len());
        fb.iter_mut().for_each(|v| *v = *v - mean);
        let spectrum = modem.spectrum(&fb)?;
        for (k, x) in config.active_bins().zip(&data) {
            let xt = x * g0;
            num[k] = num[k] + spectrum[k] * xt.conj();
            den[k] = den[k] + xt.norm_sqr();
        }
    }
    let lower: Vec<Complex<T>> = num
        .iter()
        .zip(&den)
        .map(|(n, &d)| if d > T::zero() { n / d } else { Complex::new(T::zero(), T::zero()) })
        .collect();
    FeedbackSpectrum::from_lower_half(&lower, config.n_fft)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::led::{default_lowpass_response, lowpass_at, FrequencyResponse};
    use crate::ofdm::{hermitian_map, Qam};
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    type C = Complex<f64>;

    fn lowpass_spectrum(cfg: &OfdmConfig<f64>) -> Vec<C> {
        let resp: FrequencyResponse<f64> = default_lowpass_response(2e6, 10.01e6, 512, 6e6).unwrap();
        let mut v = vec![C::new(0.0, 0.0); cfg.n_fft];
        for k in 1..cfg.n_fft / 2 {
            v[k] = resp.at(cfg.bin_frequency(k));
            v[cfg.n_fft - k] = v[k].conj();
        }
        v
    }

    /// Applies a per-bin response to the body of a frame.
    fn through(modem: &Modem<f64>, h: &[C], frame: &TimeFrame<f64>) -> Vec<f64> {
        let cfg = modem.config();
        let spec = modem.spectrum(&frame.samples).unwrap();
        let shaped: Vec<C> = spec.iter().zip(h).map(|(a, b)| a * b).collect();
        let body = modem.transform().inverse_real(&shaped).unwrap();
        let mut out = body[cfg.n_fft - cfg.n_cp..].to_vec();
        out.extend(body);
        out
    }

    #[test]
    fn flat_gain_examples() {
        let c = OfdmConfig::<f64>::default();
        let oracle = (3.0 * 0.03f64.powi(2) * 1024f64.powi(2) / (2.0 * 1022.0 * 15.0)).sqrt();
        assert_abs_diff_eq!(flat_gain(&c).unwrap(), oracle, epsilon = 1e-15);
        assert_abs_diff_eq!(oracle, 0.30387, epsilon = 1e-5);
        let small = OfdmConfig { n_fft: 4, mod_order: 4, clip_hi: 5.0, clip_lo: -5.0, ..c };
        assert_abs_diff_eq!(flat_gain(&small).unwrap(), 2.0, epsilon = 1e-12);
        let double = OfdmConfig { clip_hi: 0.3, clip_lo: -0.3, ..c };
        assert_abs_diff_eq!(flat_gain(&double).unwrap(), 2.0 * flat_gain(&c).unwrap(), epsilon = 1e-15);
        assert!(flat_gain(&OfdmConfig { n_fft: 2, ..c }).is_err());
    }

    #[test]
    fn flat_feedback_reduces_to_flat_gain() {
        let c = OfdmConfig::<f64>::default();
        let fb = FeedbackSpectrum::new(vec![C::new(1.0, 0.0); 1024]).unwrap();
        let g = zf_gains(&fb, &c).unwrap();
        let flat = GainVector::flat(&c).unwrap();
        for k in c.active_bins() {
            assert_abs_diff_eq!(g.as_slice()[k].re, flat.as_slice()[k].re, epsilon = 1e-12);
            assert_abs_diff_eq!(g.as_slice()[k].im, 0.0, epsilon = 1e-12);
        }
        // Constant c: each gain is the flat gain scaled by 1/c up to the
        // overall power normalization, which restores |G| = |G|_flat.
        let fb = FeedbackSpectrum::new(vec![C::new(0.0, 0.25); 1024]).unwrap();
        let g = zf_gains(&fb, &c).unwrap();
        for k in c.active_bins() {
            assert_abs_diff_eq!(g.as_slice()[k].norm(), flat.scale, epsilon = 1e-12);
            assert_abs_diff_eq!(g.scale, 0.25 * flat.scale, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_excluded_bin_per_half_matches_flat_budget() {
        let c = OfdmConfig::<f64>::default();
        assert_eq!(c.excluded_per_half(), 1);
        assert_abs_diff_eq!(power_budget(&c, 2 * c.n_active()), flat_gain(&c).unwrap().powi(2), epsilon = 1e-15);
    }

    #[test]
    fn gains_are_hermitian_with_nulls() {
        let c = OfdmConfig::<f64> { n_suppressed: 100, ..Default::default() };
        let g = zf_gains(&FeedbackSpectrum::new(lowpass_spectrum(&c)).unwrap(), &c).unwrap();
        let v = g.as_slice();
        assert_eq!(v[0], C::new(0.0, 0.0));
        assert_eq!(v[512], C::new(0.0, 0.0));
        for k in 1..=100 {
            assert_eq!(v[k], C::new(0.0, 0.0));
            assert_eq!(v[1024 - k], C::new(0.0, 0.0));
        }
        for k in 1..512 {
            assert_eq!(v[1024 - k], v[k].conj());
        }
        assert_abs_diff_eq!(g.expected_variance(16), 0.03 * 0.03, epsilon = 1e-15);
    }

    #[test]
    fn lowpass_gains_increase_with_frequency() {
        let c = OfdmConfig::<f64>::default();
        let g = zf_gains(&FeedbackSpectrum::new(lowpass_spectrum(&c)).unwrap(), &c).unwrap();
        for k in 2..512 {
            assert!(g.as_slice()[k].norm() > g.as_slice()[k - 1].norm(), "bin {k}");
        }
    }

    #[test]
    fn weak_bins_are_excluded() {
        let c = OfdmConfig::<f64> { n_fft: 64, ..Default::default() };
        let mut y = vec![C::new(1.0, 0.0); 64];
        y[7] = C::new(1e-3, 0.0);
        y[57] = y[7];
        let g = zf_gains(&FeedbackSpectrum::new(y).unwrap(), &c).unwrap();
        assert_eq!(g.excluded, vec![7]);
        assert_eq!(g.as_slice()[7], C::new(0.0, 0.0));
        assert_abs_diff_eq!(g.expected_variance(16), 0.03 * 0.03, epsilon = 1e-15);
        assert!(FeedbackSpectrum::new(vec![C::new(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn protocol_on_ideal_channel_returns_flat_gain() {
        let c = OfdmConfig::<f64>::default();
        let modem = Modem::new(c).unwrap();
        let mut link = |f: &TimeFrame<f64>| Ok(f.samples.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = run_preeq_protocol(&modem, &mut link, 4, &mut rng).unwrap();
        let flat = flat_gain(&c).unwrap();
        for k in c.active_bins() {
            assert_abs_diff_eq!(g.as_slice()[k].re, flat, epsilon = 1e-9);
            assert_abs_diff_eq!(g.as_slice()[k].im, 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn protocol_flattens_lowpass_channel() {
        let c = OfdmConfig::<f64>::default();
        let modem = Modem::new(c).unwrap();
        let h = lowpass_spectrum(&c);
        let mut link = |f: &TimeFrame<f64>| Ok(through(&modem, &h, f));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = run_preeq_protocol(&modem, &mut link, 4, &mut rng).unwrap();
        let p: Vec<f64> = c.active_bins().map(|k| (g.as_slice()[k] * h[k]).norm_sqr()).collect();
        let (lo, hi) = p.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(10.0 * (hi / lo).log10() < 0.01);
        // Analytic check against the generating response itself.
        let f = c.bin_frequency(300);
        let rel = (g.as_slice()[300] * lowpass_at(2e6, 10.01e6, f)).norm() / (g.as_slice()[1] * h[1]).norm();
        assert!((rel - 1.0).abs() < 1e-3);
    }

    #[test]
    fn noisy_feedback_stays_close() {
        let c = OfdmConfig::<f64>::default();
        let modem = Modem::new(c).unwrap();
        let h = lowpass_spectrum(&c);
        let mut clean = |f: &TimeFrame<f64>| Ok(through(&modem, &h, f));
        let reference = run_preeq_protocol(&modem, &mut clean, 4, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        // Noise at 30 dB below the mean active-bin signal power.
        let mut signal = 0.0;
        let probe = Qam::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let flat = GainVector::flat(&c).unwrap();
        for _ in 0..8 {
            let bits: Vec<u8> = (0..c.bits_per_frame()).map(|_| rng.random_range(0..2)).collect();
            let x = hermitian_map(&probe.modulate::<f64>(&bits).unwrap(), 1024, 0).unwrap();
            signal += c.active_bins().map(|k| (x[k] * flat.as_slice()[k] * h[k]).norm_sqr()).sum::<f64>()
                / c.n_active() as f64
                / 8.0;
        }
        let sigma = (signal / 1024.0 / 1e3).sqrt();
        for trial in 0..5u64 {
            let mut nrng = ChaCha8Rng::seed_from_u64(100 + trial);
            let mut noisy = |f: &TimeFrame<f64>| {
                Ok(through(&modem, &h, f)
                    .into_iter()
                    .map(|v| v + sigma * nrng.sample::<f64, _>(StandardNormal))
                    .collect())
            };
            let g = run_preeq_protocol(&modem, &mut noisy, 4, &mut ChaCha8Rng::seed_from_u64(200 + trial)).unwrap();
            let close = c
                .active_bins()
                .filter(|&k| (20.0 * (g.as_slice()[k].norm() / reference.as_slice()[k].norm()).log10()).abs() < 1.0)
                .count();
            assert!(close as f64 >= 0.99 * c.n_active() as f64, "trial {trial}: {close}");
        }
    }

    #[test]
    fn pre_equalized_frames_meet_variance_target() {
        let c = OfdmConfig::<f64>::default();
        let modem = Modem::new(c).unwrap();
        let g = zf_gains(&FeedbackSpectrum::new(lowpass_spectrum(&c)).unwrap(), &c).unwrap();
        let q = Qam::new(16).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut acc = 0.0;
        let frames = 10_000;
        for _ in 0..frames {
            let bits: Vec<u8> = (0..c.bits_per_frame()).map(|_| rng.random_range(0..2)).collect();
            let u = modem.modulate_unclipped(&q.modulate(&bits).unwrap(), g.as_slice()).unwrap();
            acc += u.samples[c.n_cp..].iter().map(|v| v * v).sum::<f64>() / 1024.0;
        }
        assert!((acc / frames as f64 / 9e-4 - 1.0).abs() < 0.02);
    }

    #[test]
    fn gain_csv_layout() {
        let c = OfdmConfig::<f64> { n_fft: 8, ..Default::default() };
        let mut buf = Vec::new();
        GainVector::flat(&c).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "bin,re,im");
        assert_eq!(lines.len(), 9);
        assert!(lines[1].starts_with("0,0e0"));
    }
}
