//! Electro-optical model of the phosphor-coated HPLED and of the
//! LED → photodiode → TIA electric gain.
//!
//! Optical power follows a temperature-indexed quadratic
//! `P_T(I) = a2·I² + a1·I + a0`. Coefficients between tabulated temperatures
//! are interpolated linearly, one coefficient at a time.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// One row of the characterization table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedPolyEntry<T> {
    pub temp_c: T,
    /// Quadratic coefficient, W/A².
    pub a2: T,
    /// Linear coefficient, W/A.
    pub a1: T,
    /// Constant term, W.
    pub a0: T,
    /// Correlation coefficient of the original fit, when known.
    pub corr: Option<T>,
}

/// Fitted characterization of a Multicomp 1 W white HPLED between -10 °C and
/// 100 °C: `(temp_c, A, B, C, R)`.
pub const MULTICOMP_1W_TABLE: [(f64, f64, f64, f64, f64); 12] = [
    (-10.0, -0.23735, 0.764263, 0.009285, 0.99997),
    (0.0, -0.24969, 0.763086, 0.008686, 0.99998),
    (10.0, -0.22750, 0.751208, 0.008882, 0.99999),
    (20.0, -0.24060, 0.745831, 0.008781, 0.99998),
    (30.0, -0.22566, 0.742316, 0.008848, 0.99997),
    (40.0, -0.25976, 0.734123, 0.008910, 0.99993),
    (50.0, -0.26767, 0.730652, 0.008128, 0.99997),
    (60.0, -0.26323, 0.722152, 0.008205, 0.99998),
    (70.0, -0.27341, 0.713003, 0.007769, 0.99997),
    (80.0, -0.27189, 0.698047, 0.007694, 0.99997),
    (90.0, -0.26485, 0.680774, 0.007487, 0.99997),
    (100.0, -0.25532, 0.661240, 0.007331, 0.99997),
];

/// Optical power polynomial at one fixed junction temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedPolynomial<T> {
    pub a2: T,
    pub a1: T,
    pub a0: T,
    /// Valid drive current interval `[min, max]`, amperes.
    pub current_range: (T, T),
}

impl<T: Real> LedPolynomial<T> {
    pub fn eval_unchecked(&self, i: T) -> T {
        (self.a2 * i + self.a1) * i + self.a0
    }

    pub fn power(&self, i: T) -> Result<T> {
        let (lo, hi) = self.current_range;
        if !(i >= lo && i <= hi) {
            return Err(Error::domain(
                "LED current",
                format!("{i} A outside the valid range [{lo}, {hi}] A"),
            ));
        }
        Ok(self.eval_unchecked(i))
    }

    /// Small-signal slope dP/dI at `i`, W/A.
    pub fn slope(&self, i: T) -> T {
        T::lit(2.0) * self.a2 * i + self.a1
    }

    /// Drives a whole frame of currents through the LED.
    pub fn power_frame(&self, currents: &[T]) -> Result<Vec<T>> {
        currents.iter().map(|&i| self.power(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedModel<T> {
    entries: Vec<LedPolyEntry<T>>,
    /// Datasheet flux at the reference operating point, lm.
    pub flux_ref_lm: T,
    /// TIA voltage measured at the reference operating point, V.
    pub vtia_ref_v: T,
    /// Optical watts per lumen for a phosphor-coated blue LED.
    pub watts_per_lumen: T,
    pub current_range: (T, T),
    /// Permits evaluating temperatures outside the tabulated span by
    /// extending the end segments.
    pub allow_extrapolation: bool,
}

impl<T: Real> LedModel<T> {
    pub fn new(entries: Vec<LedPolyEntry<T>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidConfig("LED model has no entries".into()));
        }
        for w in entries.windows(2) {
            if !(w[1].temp_c > w[0].temp_c) {
                return Err(Error::InvalidConfig(format!(
                    "LED model temperatures must be strictly increasing ({} then {})",
                    w[0].temp_c, w[1].temp_c
                )));
            }
        }
        if entries
            .iter()
            .any(|e| !(e.a2.is_finite() && e.a1.is_finite() && e.a0.is_finite()))
        {
            return Err(Error::InvalidConfig("non-finite LED coefficient".into()));
        }
        Ok(Self {
            entries,
            flux_ref_lm: T::lit(115.0),
            vtia_ref_v: T::lit(3.457),
            watts_per_lumen: T::lit(2.1e-3),
            current_range: (T::zero(), T::lit(0.35)),
            allow_extrapolation: false,
        })
    }

    /// The built-in characterization of the Multicomp 1 W white HPLED.
    pub fn multicomp_1w() -> Self {
        let entries = MULTICOMP_1W_TABLE
            .iter()
            .map(|&(t, a2, a1, a0, r)| LedPolyEntry {
                temp_c: T::lit(t),
                a2: T::lit(a2),
                a1: T::lit(a1),
                a0: T::lit(a0),
                corr: Some(T::lit(r)),
            })
            .collect();
        Self::new(entries).expect("built-in table is valid")
    }

    /// A temperature-independent LED with the given polynomial, e.g. a purely
    /// linear emitter for reference runs.
    pub fn constant(a2: T, a1: T, a0: T) -> Self {
        Self::new(vec![LedPolyEntry {
            temp_c: T::zero(),
            a2,
            a1,
            a0,
            corr: None,
        }])
        .map(|mut m| {
            m.allow_extrapolation = true;
            m
        })
        .expect("single entry is valid")
    }

    pub fn entries(&self) -> &[LedPolyEntry<T>] {
        &self.entries
    }

    pub fn with_current_range(mut self, lo: T, hi: T) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "LED current range [{lo}, {hi}] is empty"
            )));
        }
        self.current_range = (lo, hi);
        Ok(self)
    }

    pub fn temperature_span(&self) -> (T, T) {
        (
            self.entries[0].temp_c,
            self.entries[self.entries.len() - 1].temp_c,
        )
    }

    /// Polynomial at `temp_c`, interpolating coefficients between the two
    /// bracketing table rows.
    pub fn at_temperature(&self, temp_c: T) -> Result<LedPolynomial<T>> {
        let e = &self.entries;
        let (lo, hi) = self.temperature_span();
        if !temp_c.is_finite() {
            return Err(Error::domain("LED temperature", "must be finite"));
        }
        if (temp_c < lo || temp_c > hi) && !self.allow_extrapolation {
            return Err(Error::domain(
                "LED temperature",
                format!("{temp_c} °C outside the characterized span [{lo}, {hi}] °C"),
            ));
        }
        let make = |a2, a1, a0| LedPolynomial {
            a2,
            a1,
            a0,
            current_range: self.current_range,
        };
        if e.len() == 1 {
            return Ok(make(e[0].a2, e[0].a1, e[0].a0));
        }
        if let Some(row) = e.iter().find(|r| r.temp_c == temp_c) {
            return Ok(make(row.a2, row.a1, row.a0));
        }
        // Segment index: first row with temp above the query, clamped so end
        // segments extend outward when extrapolating.
        let upper = e
            .iter()
            .position(|r| r.temp_c > temp_c)
            .unwrap_or(e.len() - 1)
            .clamp(1, e.len() - 1);
        let (p, q) = (&e[upper - 1], &e[upper]);
        let w = (temp_c - p.temp_c) / (q.temp_c - p.temp_c);
        let lerp = |x: T, y: T| x + (y - x) * w;
        Ok(make(lerp(p.a2, q.a2), lerp(p.a1, q.a1), lerp(p.a0, q.a0)))
    }

    pub fn optical_power(&self, i_led: T, temp_c: T) -> Result<T> {
        self.at_temperature(temp_c)?.power(i_led)
    }

    pub fn flux_from_tia_voltage(&self, v_tia: T) -> Result<T> {
        if !(v_tia >= T::zero()) {
            return Err(Error::domain(
                "TIA voltage",
                format!("{v_tia} V is negative"),
            ));
        }
        Ok(self.flux_ref_lm / self.vtia_ref_v * v_tia)
    }

    pub fn optical_power_from_flux(&self, flux_lm: T) -> Result<T> {
        if !(flux_lm >= T::zero()) {
            return Err(Error::domain("luminous flux", format!("{flux_lm} lm is negative")));
        }
        Ok(self.watts_per_lumen * flux_lm)
    }

    /// Reads a `temp_c,a2,a1,a0` table.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                what: "LED model CSV",
                detail: e.to_string(),
            })?
            .clone();
        let expected = ["temp_c", "a2", "a1", "a0"];
        if headers.len() < 4 || headers.iter().take(4).ne(expected.iter().copied()) {
            return Err(Error::Parse {
                what: "LED model CSV",
                detail: format!("header must be `temp_c,a2,a1,a0`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut entries = Vec::new();
        for rec in rdr.deserialize::<LedRow>() {
            let row = rec.map_err(|e| Error::Parse {
                what: "LED model CSV",
                detail: e.to_string(),
            })?;
            entries.push(LedPolyEntry {
                temp_c: T::lit(row.temp_c),
                a2: T::lit(row.a2),
                a1: T::lit(row.a1),
                a0: T::lit(row.a0),
                corr: None,
            });
        }
        Self::new(entries)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(LedRow {
                temp_c: e.temp_c.to_f64_lossy(),
                a2: e.a2.to_f64_lossy(),
                a1: e.a1.to_f64_lossy(),
                a0: e.a0.to_f64_lossy(),
            })
            .map_err(|e| Error::csv("<LED model>", e))?;
        }
        w.flush().map_err(|e| Error::io("<LED model>", e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LedRow {
    temp_c: f64,
    a2: f64,
    a1: f64,
    a0: f64,
}

/// One measured point of the electric gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponsePoint<T> {
    pub freq_hz: T,
    /// Linear magnitude.
    pub magnitude: T,
    /// Phase in radians.
    pub phase: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    /// Linear in magnitude and in phase, holding the end values outside the
    /// sampled band.
    #[default]
    LinearMagnitudePhase,
}

/// Normalized frequency response of the LED → photodiode → TIA chain.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse<T> {
    points: Vec<ResponsePoint<T>>,
    pub interpolation: Interpolation,
}

impl<T: Real> FrequencyResponse<T> {
    pub fn new(points: Vec<ResponsePoint<T>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidConfig("frequency response is empty".into()));
        }
        for p in &points {
            if !(p.freq_hz >= T::zero() && p.magnitude >= T::zero() && p.phase.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "bad response sample at {} Hz",
                    p.freq_hz
                )));
            }
        }
        if points.windows(2).any(|w| !(w[1].freq_hz > w[0].freq_hz)) {
            return Err(Error::InvalidConfig(
                "response frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            points,
            interpolation: Interpolation::LinearMagnitudePhase,
        })
    }

    /// Unit gain at every frequency.
    pub fn flat() -> Self {
        Self::new(vec![ResponsePoint {
            freq_hz: T::zero(),
            magnitude: T::one(),
            phase: T::zero(),
        }])
        .expect("valid")
    }

    pub fn points(&self) -> &[ResponsePoint<T>] {
        &self.points
    }

    /// Interpolated complex response at `f`.
    pub fn at(&self, f: T) -> Complex<T> {
        let p = &self.points;
        let (mag, ph) = if f <= p[0].freq_hz {
            (p[0].magnitude, p[0].phase)
        } else if f >= p[p.len() - 1].freq_hz {
            let last = p[p.len() - 1];
            (last.magnitude, last.phase)
        } else {
            let k = p.partition_point(|q| q.freq_hz <= f);
            let (a, b) = (p[k - 1], p[k]);
            let w = (f - a.freq_hz) / (b.freq_hz - a.freq_hz);
            (
                a.magnitude + (b.magnitude - a.magnitude) * w,
                a.phase + (b.phase - a.phase) * w,
            )
        };
        Complex::from_polar(mag, ph)
    }

    /// Reads a `freq_hz,magnitude_db,phase_deg` table.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                what: "frequency response CSV",
                detail: e.to_string(),
            })?
            .clone();
        if headers.iter().ne(["freq_hz", "magnitude_db", "phase_deg"].iter().copied()) {
            return Err(Error::Parse {
                what: "frequency response CSV",
                detail: "header must be `freq_hz,magnitude_db,phase_deg`".into(),
            });
        }
        let mut points = Vec::new();
        for rec in rdr.deserialize::<ResponseRow>() {
            let row = rec.map_err(|e| Error::Parse {
                what: "frequency response CSV",
                detail: e.to_string(),
            })?;
            points.push(ResponsePoint {
                freq_hz: T::lit(row.freq_hz),
                magnitude: T::lit(10f64.powf(row.magnitude_db / 20.0)),
                phase: T::lit(row.phase_deg.to_radians()),
            });
        }
        Self::new(points)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for p in &self.points {
            w.serialize(ResponseRow {
                freq_hz: p.freq_hz.to_f64_lossy(),
                magnitude_db: 20.0 * p.magnitude.to_f64_lossy().log10(),
                phase_deg: p.phase.to_f64_lossy().to_degrees(),
            })
            .map_err(|e| Error::csv("<frequency response>", e))?;
        }
        w.flush().map_err(|e| Error::io("<frequency response>", e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ResponseRow {
    freq_hz: f64,
    magnitude_db: f64,
    phase_deg: f64,
}

/// `G_E(f)`: the normalized chain response scaled by the geometric DC gain.
pub fn electric_gain<T: Real>(
    resp: &FrequencyResponse<T>,
    omega_dc: T,
    f: T,
) -> Result<Complex<T>> {
    if !(f >= T::zero()) {
        return Err(Error::domain("frequency", format!("{f} Hz is negative")));
    }
    Ok(resp.at(f) * omega_dc)
}

/// Exact response of a first-order pole at `f_led_cutoff` (phosphor
/// persistence) cascaded with a second-order Butterworth pole pair at
/// `f_tia_bandwidth`. Either corner may be infinite to drop that stage.
pub fn lowpass_at<T: Real>(f_led_cutoff: T, f_tia_bandwidth: T, f: T) -> Complex<T> {
    let one = Complex::new(T::one(), T::zero());
    let led = one / Complex::new(T::one(), f / f_led_cutoff);
    let s = f / f_tia_bandwidth;
    let tia = one / Complex::new(T::one() - s * s, T::SQRT_2() * s);
    led * tia
}

/// Samples [`lowpass_at`] at `n_points` evenly spaced frequencies in
/// `[0, f_max]`.
pub fn default_lowpass_response<T: Real>(
    f_led_cutoff: T,
    f_tia_bandwidth: T,
    n_points: usize,
    f_max: T,
) -> Result<FrequencyResponse<T>> {
    if !(f_led_cutoff > T::zero()) || !(f_tia_bandwidth > T::zero()) {
        return Err(Error::domain("low-pass corner", "must be > 0"));
    }
    if n_points < 2 {
        return Err(Error::domain("n_points", "need at least 2 samples"));
    }
    if !(f_max > T::zero() && f_max.is_finite()) {
        return Err(Error::domain("f_max", "must be finite and > 0"));
    }
    let step = f_max / T::from_count(n_points - 1);
    let points = (0..n_points)
        .map(|k| {
            let f = step * T::from_count(k);
            // Phases of each pole taken separately so the sum stays unwrapped.
            let led = T::zero() - (f / f_led_cutoff).atan();
            let s = f / f_tia_bandwidth;
            let tia = T::zero() - (T::SQRT_2() * s).atan2(T::one() - s * s);
            ResponsePoint {
                freq_hz: f,
                magnitude: lowpass_at(f_led_cutoff, f_tia_bandwidth, f).norm(),
                phase: led + tia,
            }
        })
        .collect();
    FrequencyResponse::new(points)
}

/// Phosphor-limited LED corner used when no measured response is supplied.
pub const DEFAULT_LED_CUTOFF_HZ: f64 = 2.0e6;
/// Bandwidth of the transimpedance amplifier.
pub const DEFAULT_TIA_BANDWIDTH_HZ: f64 = 10.01e6;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> LedModel<f64> {
        LedModel::multicomp_1w()
    }

    #[test]
    fn power_at_rated_current_30c() {
        let p = model().optical_power(0.35, 30.0).unwrap();
        let direct = -0.22566 * 0.1225 + 0.742316 * 0.35 + 0.008848;
        assert_relative_eq!(p, direct, max_relative = 1e-14);
        assert!((p - 0.2410).abs() < 5e-5);
        // Datasheet cross-check: 115 lm at 2.1 mW/lm.
        assert!((p - 0.2415).abs() / 0.2415 < 0.01);
    }

    #[test]
    fn power_at_half_current_50c() {
        let p = model().optical_power(0.175, 50.0).unwrap();
        assert!((p - 0.1278).abs() < 5e-5, "{p}");
    }

    #[test]
    fn zero_current_is_constant_term() {
        assert_eq!(model().optical_power(0.0, 20.0).unwrap(), 0.008781);
    }

    #[test]
    fn out_of_range_current_names_range() {
        let err = model().optical_power(0.4, 30.0).unwrap_err().to_string();
        assert!(err.contains("0.35"), "{err}");
        assert!(model().optical_power(-0.01, 30.0).is_err());
    }

    #[test]
    fn temperature_interpolation_is_per_coefficient() {
        let m = model();
        let mid = m.at_temperature(45.0).unwrap();
        assert_relative_eq!(mid.a2, 0.5 * (-0.25976 - 0.26767), max_relative = 1e-14);
        assert_relative_eq!(mid.a1, 0.5 * (0.734123 + 0.730652), max_relative = 1e-14);
        assert_relative_eq!(mid.a0, 0.5 * (0.008910 + 0.008128), max_relative = 1e-14);
    }

    #[test]
    fn extrapolation_is_opt_in() {
        let mut m = model();
        assert!(m.at_temperature(105.0).is_err());
        assert!(m.at_temperature(-20.0).is_err());
        m.allow_extrapolation = true;
        let p = m.at_temperature(110.0).unwrap();
        assert_relative_eq!(p.a1, 0.661240 + (0.661240 - 0.680774), max_relative = 1e-12);
    }

    #[test]
    fn table_shape_invariants() {
        let m = model();
        for e in m.entries() {
            assert!(e.a2 < 0.0);
            assert!(m.optical_power(0.35, e.temp_c).unwrap() > 0.0);
            let p = m.at_temperature(e.temp_c).unwrap();
            // Concave on the whole valid range.
            assert!(p.slope(0.0) > p.slope(0.35));
        }
        let powers: Vec<f64> = [0.0, 20.0, 40.0, 60.0, 80.0, 100.0]
            .iter()
            .map(|&t| m.optical_power(0.35, t).unwrap())
            .collect();
        assert!(powers.windows(2).all(|w| w[1] <= w[0]), "{powers:?}");
    }

    #[test]
    fn constructor_rejects_unordered_rows() {
        let row = |t| LedPolyEntry {
            temp_c: t,
            a2: -0.2,
            a1: 0.7,
            a0: 0.0,
            corr: None,
        };
        assert!(LedModel::new(vec![row(10.0), row(10.0)]).is_err());
        assert!(LedModel::new(vec![row(10.0), row(0.0)]).is_err());
        assert!(LedModel::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn flux_and_power_conversions() {
        let m = model();
        assert_relative_eq!(m.flux_from_tia_voltage(3.457).unwrap(), 115.0, max_relative = 1e-14);
        assert_eq!(m.flux_from_tia_voltage(0.0).unwrap(), 0.0);
        assert!((m.flux_from_tia_voltage(1.0).unwrap() - 33.266).abs() < 5e-4);
        assert!(m.flux_from_tia_voltage(-0.1).is_err());
        assert_relative_eq!(m.optical_power_from_flux(115.0).unwrap(), 0.2415, max_relative = 1e-12);
        assert_eq!(m.optical_power_from_flux(0.0).unwrap(), 0.0);
        assert_relative_eq!(m.optical_power_from_flux(100.0).unwrap(), 0.21, max_relative = 1e-12);
        assert!(m.optical_power_from_flux(-1.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = model();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("temp_c,a2,a1,a0\n"));
        let back = LedModel::<f64>::read_csv(buf.as_slice()).unwrap();
        for (a, b) in m.entries().iter().zip(back.entries()) {
            assert_eq!((a.temp_c, a.a2, a.a1, a.a0), (b.temp_c, b.a2, b.a1, b.a0));
        }
        assert!(LedModel::<f64>::read_csv("t,a,b,c\n0,1,2,3\n".as_bytes()).is_err());
    }

    #[test]
    fn flat_response_passes_geometric_gain() {
        let g = electric_gain(&FrequencyResponse::flat(), 5.968e-8, 3.3e6).unwrap();
        assert_eq!(g, Complex::new(5.968e-8, 0.0));
        assert!(electric_gain(&FrequencyResponse::flat(), 1.0, -1.0).is_err());
    }

    #[test]
    fn two_point_linear_interpolation() {
        let r = FrequencyResponse::new(vec![
            ResponsePoint { freq_hz: 0.0, magnitude: 1.0, phase: 0.0 },
            ResponsePoint { freq_hz: 10e6, magnitude: 0.5, phase: -1.0 },
        ])
        .unwrap();
        let g = electric_gain(&r, 1.0, 5e6).unwrap();
        assert_relative_eq!(g.norm(), 0.75, max_relative = 1e-14);
        assert_relative_eq!(g.arg(), -0.5, max_relative = 1e-14);
        // Held beyond both ends.
        assert_relative_eq!(r.at(20e6).norm(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn response_rejects_bad_tables() {
        let p = |f, m| ResponsePoint { freq_hz: f, magnitude: m, phase: 0.0 };
        assert!(FrequencyResponse::<f64>::new(vec![]).is_err());
        assert!(FrequencyResponse::new(vec![p(1.0, 1.0), p(1.0, 1.0)]).is_err());
        assert!(FrequencyResponse::new(vec![p(-1.0, 1.0)]).is_err());
        assert!(FrequencyResponse::new(vec![p(0.0, -1.0)]).is_err());
    }

    #[test]
    fn parametric_response_shape() {
        let r = default_lowpass_response(2e6, 10.01e6, 501, 10e6).unwrap();
        let dc = r.at(0.0);
        assert_relative_eq!(dc.norm(), 1.0, max_relative = 1e-15);
        assert_eq!(dc.arg(), 0.0);
        let mags: Vec<f64> = r.points().iter().map(|p| p.magnitude).collect();
        assert!(mags.windows(2).all(|w| w[1] <= w[0]));
        // Sampled phases match the exact cascade.
        for p in r.points() {
            let exact = lowpass_at(2e6, 10.01e6, p.freq_hz);
            assert_relative_eq!(p.phase.sin(), exact.arg().sin(), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_pole_corner_is_minus_three_db() {
        let r = default_lowpass_response(2e6, f64::INFINITY, 11, 4e6).unwrap();
        assert_relative_eq!(r.at(2e6).norm(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-12);
        assert_relative_eq!(r.at(2e6).arg(), -std::f64::consts::FRAC_PI_4, max_relative = 1e-12);
        let tia_only = lowpass_at(f64::INFINITY, 10.01e6, 10.01e6);
        assert_relative_eq!(tia_only.norm(), std::f64::consts::FRAC_1_SQRT_2, max_relative = 1e-12);
    }

    #[test]
    fn response_csv_round_trip() {
        let r = default_lowpass_response(2e6, 10.01e6, 9, 8e6).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"freq_hz,magnitude_db,phase_deg\n"));
        let back = FrequencyResponse::<f64>::read_csv(buf.as_slice()).unwrap();
        for (a, b) in r.points().iter().zip(back.points()) {
            assert_relative_eq!(a.magnitude, b.magnitude, max_relative = 1e-12);
            assert_relative_eq!(a.phase, b.phase, epsilon = 1e-12);
        }
    }
}
