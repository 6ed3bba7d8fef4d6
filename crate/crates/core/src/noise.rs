//! Receiver noise: photodiode shot noise plus TIA thermal noise, and AWGN
//! synthesis at a prescribed SNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// TIA bandwidth factor of a FET front end.
pub const TIA_BANDWIDTH_FACTOR_I2: f64 = 0.562;
/// TIA noise-bandwidth factor of a FET front end.
pub const TIA_NOISE_FACTOR_I3: f64 = 0.0868;

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602176634e-19;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;

/// PIN photodiode + FET transimpedance receiver parameters, SI units.
///
/// The front-end defaults (open-loop gain 10, Γ = 1.5, g_m = 30 mS,
/// 112 pF/cm², 295 K) are the usual indoor FET receiver values; background
/// light is 5.8 µW/(cm²·nm) over a 300 nm filter, dark current 2 nA (BPW34).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams<T> {
    pub elementary_charge: T,
    /// Receiver noise bandwidth B, Hz.
    pub bandwidth_hz: T,
    /// Responsivity R_pd, A/W.
    pub responsivity: T,
    /// Photodiode area A_pd, m².
    pub pd_area: T,
    /// Background spectral irradiance p_bs, W/(m²·nm).
    pub background_irradiance: T,
    /// Optical filter bandwidth Δλ, nm.
    pub optical_filter_bw_nm: T,
    /// Dark current I_dc, A.
    pub dark_current: T,
    pub boltzmann: T,
    pub temp_kelvin: T,
    /// Open-loop voltage gain G_ol.
    pub open_loop_gain: T,
    /// Photodiode capacitance per unit area C_pd, F/m².
    pub pd_cap_per_area: T,
    /// FET channel noise factor Γ.
    pub fet_noise_factor: T,
    /// FET transconductance g_m, S.
    pub fet_transconductance: T,
    i2: T,
    i3: T,
}

impl<T: Real> Default for NoiseParams<T> {
    fn default() -> Self {
        Self {
            elementary_charge: T::lit(ELEMENTARY_CHARGE),
            bandwidth_hz: T::lit(10.01e6),
            responsivity: T::lit(0.54),
            pd_area: T::lit(1e-6),
            background_irradiance: T::lit(5.8e-2),
            optical_filter_bw_nm: T::lit(300.0),
            dark_current: T::lit(2e-9),
            boltzmann: T::lit(BOLTZMANN),
            temp_kelvin: T::lit(295.0),
            open_loop_gain: T::lit(10.0),
            pd_cap_per_area: T::lit(1.12e-6),
            fet_noise_factor: T::lit(1.5),
            fet_transconductance: T::lit(30e-3),
            i2: T::lit(TIA_BANDWIDTH_FACTOR_I2),
            i3: T::lit(TIA_NOISE_FACTOR_I3),
        }
    }
}

impl<T: Real> NoiseParams<T> {
    pub fn i2(&self) -> T {
        self.i2
    }

    pub fn i3(&self) -> T {
        self.i3
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("elementary_charge", self.elementary_charge),
            ("responsivity", self.responsivity),
            ("pd_area", self.pd_area),
            ("background_irradiance", self.background_irradiance),
            ("optical_filter_bw_nm", self.optical_filter_bw_nm),
            ("dark_current", self.dark_current),
            ("boltzmann", self.boltzmann),
            ("temp_kelvin", self.temp_kelvin),
            ("open_loop_gain", self.open_loop_gain),
            ("pd_cap_per_area", self.pd_cap_per_area),
            ("fet_noise_factor", self.fet_noise_factor),
            ("fet_transconductance", self.fet_transconductance),
        ];
        for (name, v) in fields {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("noise.{name} must be finite and >= 0")));
            }
        }
        if !(self.bandwidth_hz > T::zero()) {
            return Err(Error::InvalidConfig("noise.bandwidth_hz must be > 0".into()));
        }
        Ok(())
    }

    /// Shot-noise variance in A² for `received_power` watts on the detector.
    pub fn shot_variance(&self, received_power: T) -> Result<T> {
        if !(received_power >= T::zero()) {
            return Err(Error::domain(
                "received optical power",
                format!("{received_power} W is negative"),
            ));
        }
        let background = self.pd_area * self.background_irradiance * self.optical_filter_bw_nm;
        let current = self.responsivity * (received_power + background) + self.dark_current;
        Ok(T::lit(2.0) * self.elementary_charge * self.bandwidth_hz * current)
    }

    /// Thermal-noise variance in A²: feedback resistor term plus FET channel
    /// term. Independent of the received signal.
    pub fn thermal_variance(&self) -> Result<T> {
        if !(self.open_loop_gain > T::zero()) {
            return Err(Error::domain("open-loop gain", "must be > 0"));
        }
        if !(self.fet_transconductance > T::zero()) {
            return Err(Error::domain("FET transconductance", "must be > 0"));
        }
        let pi = T::PI();
        let kt = self.boltzmann * self.temp_kelvin;
        let b = self.bandwidth_hz;
        let cap = self.pd_cap_per_area * self.pd_area;
        let feedback = T::lit(8.0) * pi * kt / self.open_loop_gain * cap * self.i2 * b * b;
        let channel = T::lit(16.0) * pi * pi * kt * self.fet_noise_factor
            / self.fet_transconductance
            * cap
            * cap
            * self.i3
            * b
            * b
            * b;
        Ok(feedback + channel)
    }

    pub fn total_variance(&self, received_power: T) -> Result<T> {
        Ok(self.shot_variance(received_power)? + self.thermal_variance()?)
    }

    /// Standard deviation of the receiver noise current, A.
    pub fn total_noise_std(&self, received_power: T) -> Result<T> {
        Ok(self.total_variance(received_power)?.sqrt())
    }
}

/// Combines two variances into a standard deviation.
pub fn total_noise_std<T: Real>(shot_variance: T, thermal_variance: T) -> T {
    (shot_variance + thermal_variance).sqrt()
}

/// Population variance around the sample mean.
pub fn variance<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    let n = T::from_count(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n
}

/// Adds zero-mean Gaussian noise of standard deviation `std` in place.
pub fn add_gaussian<T: Real, R: Rng + ?Sized>(samples: &mut [T], std: T, rng: &mut R)
where
    StandardNormal: Distribution<T>,
{
    for s in samples {
        let z: T = StandardNormal.sample(rng);
        *s = *s + z * std;
    }
}

/// Returns `signal` plus white Gaussian noise of variance
/// `var(signal) / 10^(snr_db/10)`. The output depends only on the inputs and
/// `rng_seed`.
pub fn awgn_at_snr<T: Real>(signal: &[T], snr_db: T, rng_seed: u64) -> Result<Vec<T>>
where
    StandardNormal: Distribution<T>,
{
    if signal.is_empty() {
        return Err(Error::domain("AWGN input", "signal is empty"));
    }
    let var = variance(signal);
    if !(var > T::zero()) {
        return Err(Error::domain("AWGN input", "signal has zero variance"));
    }
    let noise_var = var / T::lit(10.0).powf(snr_db / T::lit(10.0));
    let mut out = signal.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    add_gaussian(&mut out, noise_var.sqrt(), &mut rng);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn quiet() -> NoiseParams<f64> {
        NoiseParams {
            background_irradiance: 0.0,
            dark_current: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn no_light_no_shot_noise() {
        assert_eq!(quiet().shot_variance(0.0).unwrap(), 0.0);
    }

    #[test]
    fn shot_noise_numeric_instance() {
        let p = NoiseParams {
            elementary_charge: 1.602e-19,
            ..quiet()
        };
        let v = p.shot_variance(1.43e-8).unwrap();
        // 2·q·B·R·P evaluated by hand.
        let oracle = 2.0 * 1.602e-19 * 10.01e6 * 0.54 * 1.43e-8;
        assert_relative_eq!(v, oracle, max_relative = 1e-14);
        assert!((v - 2.48e-20).abs() < 0.01e-20);
    }

    #[test]
    fn shot_noise_linear_in_power() {
        let p = quiet();
        let a = p.shot_variance(1e-6).unwrap();
        assert_relative_eq!(p.shot_variance(2e-6).unwrap(), 2.0 * a, max_relative = 1e-14);
        assert!(p.shot_variance(-1e-9).is_err());
    }

    #[test]
    fn shot_noise_is_affine_and_thermal_is_constant() {
        let p = NoiseParams::<f64>::default();
        let s0 = p.shot_variance(0.0).unwrap();
        let s1 = p.shot_variance(1e-6).unwrap();
        let s2 = p.shot_variance(2e-6).unwrap();
        assert_relative_eq!(s2 - s1, s1 - s0, max_relative = 1e-9);
        assert!(s0 > 0.0);
        let t = p.thermal_variance().unwrap();
        for pr in [0.0, 1e-6, 1e-3] {
            assert_relative_eq!(p.total_variance(pr).unwrap() - p.shot_variance(pr).unwrap(), t, max_relative = 1e-9);
        }
    }

    #[test]
    fn thermal_vanishes_at_absolute_zero() {
        let p = NoiseParams { temp_kelvin: 0.0, ..NoiseParams::<f64>::default() };
        assert_eq!(p.thermal_variance().unwrap(), 0.0);
    }

    #[test]
    fn thermal_bandwidth_powers() {
        let p = NoiseParams { fet_noise_factor: 0.0, ..NoiseParams::<f64>::default() };
        let q = NoiseParams { bandwidth_hz: 2.0 * p.bandwidth_hz, ..p };
        assert_relative_eq!(q.thermal_variance().unwrap(), 4.0 * p.thermal_variance().unwrap(), max_relative = 1e-14);

        let r = NoiseParams { open_loop_gain: f64::INFINITY, ..NoiseParams::<f64>::default() };
        let s = NoiseParams { bandwidth_hz: 2.0 * r.bandwidth_hz, ..r };
        assert_relative_eq!(s.thermal_variance().unwrap(), 8.0 * r.thermal_variance().unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn thermal_indoor_instance() {
        // Hand evaluation with T = 298 K, 112 pF/cm² (1.12e-6 F/m²), 1 mm².
        let p = NoiseParams { temp_kelvin: 298.0, ..NoiseParams::<f64>::default() };
        let kt = 1.380649e-23 * 298.0;
        let c = 1.12e-6 * 1e-6;
        let b = 10.01e6_f64;
        let t1 = 8.0 * std::f64::consts::PI * kt / 10.0 * c * 0.562 * b * b;
        let t2 = 16.0 * std::f64::consts::PI.powi(2) * kt * 1.5 / 30e-3 * c * c * 0.0868 * b.powi(3);
        assert_relative_eq!(p.thermal_variance().unwrap(), t1 + t2, max_relative = 1e-14);
        assert!((p.thermal_variance().unwrap() - 6.557e-19).abs() < 0.001e-19);
    }

    #[test]
    fn thermal_rejects_zero_gains() {
        let p = NoiseParams { open_loop_gain: 0.0, ..NoiseParams::<f64>::default() };
        assert!(p.thermal_variance().is_err());
        let p = NoiseParams { fet_transconductance: 0.0, ..NoiseParams::<f64>::default() };
        assert!(p.thermal_variance().is_err());
    }

    #[test]
    fn total_std_examples() {
        assert_eq!(total_noise_std(0.0, 0.0), 0.0);
        assert_relative_eq!(total_noise_std(3e-20, 1e-20), 2e-10, max_relative = 1e-14);
    }

    #[test]
    fn validation_catches_negative_fields() {
        let p = NoiseParams { dark_current: -1.0, ..NoiseParams::<f64>::default() };
        assert!(p.validate().is_err());
        let p = NoiseParams { bandwidth_hz: 0.0, ..NoiseParams::<f64>::default() };
        assert!(p.validate().is_err());
        assert!(NoiseParams::<f64>::default().validate().is_ok());
    }

    proptest! {
        #[test]
        fn total_std_matches_components(pr in 0.0f64..1e-3, b in 1e5f64..1e8, t in 1.0f64..400.0) {
            let p = NoiseParams { bandwidth_hz: b, temp_kelvin: t, ..NoiseParams::<f64>::default() };
            let direct = (p.shot_variance(pr).unwrap() + p.thermal_variance().unwrap()).sqrt();
            prop_assert!((p.total_noise_std(pr).unwrap() - direct).abs() <= 1e-15 * direct);
        }
    }

    fn tone(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.37).sin()).collect()
    }

    #[test]
    fn huge_snr_is_transparent() {
        let s = tone(4096);
        let y = awgn_at_snr(&s, 200.0, 1).unwrap();
        let rms_err = (s.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / s.len() as f64).sqrt();
        let rms = (s.iter().map(|a| a * a).sum::<f64>() / s.len() as f64).sqrt();
        assert!(rms_err / rms < 1e-8);
    }

    #[test]
    fn zero_db_noise_matches_signal_variance() {
        let s = tone(1_000_000);
        let y = awgn_at_snr(&s, 0.0, 7).unwrap();
        let noise: Vec<f64> = y.iter().zip(&s).map(|(a, b)| a - b).collect();
        let ratio = variance(&noise) / variance(&s);
        assert!((ratio - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let s = tone(257);
        assert_eq!(awgn_at_snr(&s, 10.0, 3).unwrap(), awgn_at_snr(&s, 10.0, 3).unwrap());
        assert_ne!(awgn_at_snr(&s, 10.0, 3).unwrap(), awgn_at_snr(&s, 10.0, 4).unwrap());
    }

    #[test]
    fn awgn_rejects_degenerate_input() {
        assert!(awgn_at_snr::<f64>(&[], 10.0, 0).is_err());
        assert!(awgn_at_snr(&[1.0; 16], 10.0, 0).is_err());
    }

    #[test]
    fn generated_noise_moments() {
        let n = 10_000_000;
        let mut x = vec![0.0f64; n];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        add_gaussian(&mut x, 2.0, &mut rng);
        let mean = x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * 2.0 / (n as f64).sqrt(), "{mean}");
        let var = variance(&x);
        assert!((var / 4.0 - 1.0).abs() < 0.01, "{var}");
    }
}
