//! Second-order digital pre-distortion calibrated from luminous-feedback
//! samples, in three operating modes: none (static bias only), fixed
//! factory calibration at one temperature, and recalibration from the
//! feedback photodiode.

mod fit;

pub use fit::{polyfit2, QuadFit};

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::led::{LedModel, LedPolynomial};
use crate::noise::NoiseParams;
use crate::ofdm::TimeFrame;
use crate::scalar::Real;

/// Where a pre-distortion curve came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DpdSource<T> {
    /// No correction: drive = frame + static bias.
    None,
    /// Calibrated once at the given temperature.
    Fixed { calib_temp: T },
    /// Recalibrated from the feedback photodiode.
    LuminousFeedback,
}

impl<T: Real> DpdSource<T> {
    fn tag(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Fixed { .. } => "fixed",
            Self::LuminousFeedback => "luminous_feedback",
        }
    }
}

/// Drive mapping `I_drive = c2·I² + c1·I + c0` from modulation current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpdCurve<T> {
    pub c2: T,
    pub c1: T,
    pub c0: T,
    /// Drive current for a zero modulation sample.
    pub bias_current: T,
    pub source: DpdSource<T>,
    pub calib_levels: usize,
}

impl<T: Real> DpdCurve<T> {
    /// Pass-through with a static bias.
    pub fn passthrough(bias: T) -> Self {
        Self {
            c2: T::zero(),
            c1: T::one(),
            c0: bias,
            bias_current: bias,
            source: DpdSource::None,
            calib_levels: 0,
        }
    }

    pub fn eval(&self, i: T) -> T {
        (self.c2 * i + self.c1) * i + self.c0
    }

    pub fn slope(&self, i: T) -> T {
        T::lit(2.0) * self.c2 * i + self.c1
    }

    /// Strictly increasing on `[lo, hi]`.
    pub fn is_monotone(&self, lo: T, hi: T) -> bool {
        self.slope(lo) > T::zero() && self.slope(hi) > T::zero()
    }

    pub fn apply_samples(&self, samples: &[T]) -> Vec<T> {
        samples.iter().map(|&i| self.eval(i)).collect()
    }

    pub fn apply(&self, frame: &TimeFrame<T>) -> TimeFrame<T> {
        TimeFrame {
            samples: self.apply_samples(&frame.samples),
            sample_rate_hz: frame.sample_rate_hz,
        }
    }

    /// Like [`apply`](Self::apply), failing if any drive current leaves
    /// `[range.0, range.1]`.
    pub fn apply_checked(&self, frame: &TimeFrame<T>, range: (T, T)) -> Result<TimeFrame<T>> {
        let out = self.apply(frame);
        if let Some(bad) = out.samples.iter().find(|&&v| v < range.0 || v > range.1) {
            return Err(Error::domain(
                "pre-distorted drive current",
                format!("{bad} A outside [{}, {}] A", range.0, range.1),
            ));
        }
        Ok(out)
    }

    pub const CSV_HEADER: [&'static str; 6] =
        ["c2", "c1", "c0", "bias_current", "source_mode", "calib_temp"];

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let temp = match self.source {
            DpdSource::Fixed { calib_temp } => format!("{calib_temp:e}"),
            _ => String::new(),
        };
        let wrap = |e| Error::csv("<dpd curve>", e);
        w.write_record(Self::CSV_HEADER).map_err(wrap)?;
        w.write_record([
            format!("{:e}", self.c2),
            format!("{:e}", self.c1),
            format!("{:e}", self.c0),
            format!("{:e}", self.bias_current),
            self.source.tag().to_string(),
            temp,
        ])
        .map_err(wrap)?;
        w.flush().map_err(|e| Error::io("<dpd curve>", e))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let wrap = |e| Error::csv("<dpd curve>", e);
        let header = r.headers().map_err(wrap)?.clone();
        if header.iter().collect::<Vec<_>>() != Self::CSV_HEADER {
            return Err(Error::Parse {
                what: "dpd curve header",
                detail: format!("expected {:?}", Self::CSV_HEADER),
            });
        }
        let rec = r
            .records()
            .next()
            .ok_or_else(|| Error::Parse {
                what: "dpd curve",
                detail: "no data row".into(),
            })?
            .map_err(wrap)?;
        let num = |i: usize| -> Result<T> {
            parse_real(rec.get(i).unwrap_or(""), "dpd curve coefficient")
        };
        let source = match rec.get(4).unwrap_or("") {
            "none" => DpdSource::None,
            "luminous_feedback" => DpdSource::LuminousFeedback,
            "fixed" => DpdSource::Fixed { calib_temp: num(5)? },
            other => {
                return Err(Error::Parse {
                    what: "dpd source_mode",
                    detail: format!("unknown mode '{other}'"),
                })
            }
        };
        Ok(Self {
            c2: num(0)?,
            c1: num(1)?,
            c0: num(2)?,
            bias_current: num(3)?,
            source,
            calib_levels: 0,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }
}

fn parse_real<T: Real>(s: &str, what: &'static str) -> Result<T> {
    f64::from_str(s.trim())
        .ok()
        .and_then(T::from_f64)
        .ok_or_else(|| Error::Parse {
            what,
            detail: format!("'{s}' is not a number"),
        })
}

impl<T: Real> fmt::Display for DpdCurve<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "I_drive = {:.6e}·I² + {:.6e}·I + {:.6e} ({})",
            self.c2,
            self.c1,
            self.c0,
            self.source.tag()
        )
    }
}

/// Source of feedback TIA voltages for a given LED drive current.
pub trait FeedbackSampler<T> {
    fn sample(&mut self, drive_current: T) -> Result<T>;
}

impl<T, F> FeedbackSampler<T> for F
where
    F: FnMut(T) -> T,
{
    fn sample(&mut self, drive_current: T) -> Result<T> {
        Ok(self(drive_current))
    }
}

/// Feedback photodiode looking at the LED through the geometric gain of
/// the feedback link, read through a transimpedance amplifier.
#[derive(Debug, Clone)]
pub struct LedFeedbackSampler<T> {
    led: LedPolynomial<T>,
    /// Volts per watt of emitted optical power.
    volts_per_watt: T,
    noise: Option<(NoiseParams<T>, T, ChaCha8Rng)>,
    optical_gain: T,
}

impl<T: Real> LedFeedbackSampler<T> {
    pub fn noiseless(led: LedPolynomial<T>, optical_gain: T, responsivity: T, transimpedance: T) -> Self {
        Self {
            led,
            volts_per_watt: optical_gain * responsivity * transimpedance,
            noise: None,
            optical_gain,
        }
    }

    /// Adds receiver noise drawn from `noise` at the received power.
    pub fn with_noise(mut self, noise: NoiseParams<T>, transimpedance: T, rng: ChaCha8Rng) -> Self {
        self.noise = Some((noise, transimpedance, rng));
        self
    }
}

impl<T: Real> FeedbackSampler<T> for LedFeedbackSampler<T> {
    fn sample(&mut self, drive_current: T) -> Result<T> {
        let p = self.led.power(drive_current)?;
        let mut v = p * self.volts_per_watt;
        if let Some((params, z, rng)) = &mut self.noise {
            let std = params.total_noise_std(p * self.optical_gain)?;
            let n: f64 = rng.sample(StandardNormal);
            v = v + *z * std * T::lit(n);
        }
        Ok(v)
    }
}

/// Sweep parameters of the calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSettings {
    /// Number of equally spaced current levels J.
    pub j_levels: usize,
    /// Lower modulation current, A.
    pub i_lo: f64,
    /// Upper modulation current, A.
    pub i_hi: f64,
    /// Static bias added during the sweep, A.
    pub i_bias0: f64,
    /// Feedback samples averaged per level.
    pub samples_per_level: usize,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            j_levels: 64,
            i_lo: -0.15,
            i_hi: 0.15,
            i_bias0: 0.175,
            samples_per_level: 16,
        }
    }
}

impl CalibrationSettings {
    pub fn validate(&self) -> Result<()> {
        if self.j_levels < 3 {
            return Err(Error::InvalidConfig(format!(
                "calibration needs at least 3 levels, got {}",
                self.j_levels
            )));
        }
        if !(self.i_lo < self.i_hi) {
            return Err(Error::InvalidConfig("calibration i_lo must be below i_hi".into()));
        }
        if self.samples_per_level == 0 {
            return Err(Error::InvalidConfig("samples_per_level must be >= 1".into()));
        }
        Ok(())
    }

    fn grid<T: Real>(&self, lo: T, hi: T) -> Vec<T> {
        let last = T::from_count(self.j_levels - 1);
        (0..self.j_levels)
            .map(|j| lo + (hi - lo) * T::from_count(j) / last)
            .collect()
    }
}

/// Runs the six calibration steps against `sampler`.
///
/// 1. Sweep `I[j]` over `[i_lo, i_hi]` and drive the LED at `I[j] + i_bias0`.
/// 2. Average the feedback voltage at each level.
/// 3. Fit drive current as a parabola in feedback voltage.
/// 4. Build an equally spaced voltage grid spanning the observed voltages.
/// 5. Map that grid back to drive currents through the step-3 fit.
/// 6. Fit those currents as a parabola in `I[j]`.
pub fn calibrate<T: Real, S: FeedbackSampler<T> + ?Sized>(
    sampler: &mut S,
    settings: &CalibrationSettings,
) -> Result<DpdCurve<T>> {
    settings.validate()?;
    let i_grid: Vec<T> = settings.grid(T::lit(settings.i_lo), T::lit(settings.i_hi));
    let bias0 = T::lit(settings.i_bias0);
    let drive: Vec<T> = i_grid.iter().map(|&i| i + bias0).collect();

    let mut v_mean = Vec::with_capacity(drive.len());
    for &d in &drive {
        let mut acc = T::zero();
        for _ in 0..settings.samples_per_level {
            acc = acc + sampler.sample(d)?;
        }
        v_mean.push(acc / T::from_count(settings.samples_per_level));
    }
    if let Some(j) = (1..v_mean.len()).find(|&j| !(v_mean[j] > v_mean[j - 1])) {
        return Err(Error::Calibration(format!(
            "feedback voltage not increasing between levels {} and {j} ({} V -> {} V at {} A -> {} A)",
            j - 1,
            v_mean[j - 1],
            v_mean[j],
            drive[j - 1],
            drive[j]
        )));
    }

    let inverse = polyfit2(&v_mean, &drive)?;
    let (v_min, v_max) = (v_mean[0], v_mean[v_mean.len() - 1]);
    let inv_slope = |v: T| T::lit(2.0) * inverse.a * v + inverse.b;
    if !(inv_slope(v_min) > T::zero() && inv_slope(v_max) > T::zero()) {
        return Err(Error::Calibration(format!(
            "voltage-to-current fit folds inside [{v_min}, {v_max}] V"
        )));
    }

    let v_grid = settings.grid(v_min, v_max);
    let target: Vec<T> = v_grid.iter().map(|&v| inverse.eval(v)).collect();
    let fit = polyfit2(&i_grid, &target)?;
    log::debug!(
        "dpd calibration: inverse R = {}, drive R = {}",
        inverse.r,
        fit.r
    );
    Ok(DpdCurve {
        c2: fit.a,
        c1: fit.b,
        c0: fit.c,
        bias_current: fit.c,
        source: DpdSource::LuminousFeedback,
        calib_levels: settings.j_levels,
    })
}

/// Factory calibration: a noiseless sweep of the LED at `calib_temp`.
pub fn make_fixed_dpd<T: Real>(
    led: &LedModel<T>,
    calib_temp: T,
    settings: &CalibrationSettings,
) -> Result<DpdCurve<T>> {
    let poly = led.at_temperature(calib_temp)?;
    let mut sampler = move |i: T| poly.eval_unchecked(i);
    let mut curve = calibrate(&mut sampler, settings)?;
    curve.source = DpdSource::Fixed { calib_temp };
    Ok(curve)
}

/// Normalized RMS deviation of the composed modulation-current → optical
/// power response from its best straight line, as a fraction of the output
/// full scale.
pub fn linearity_residual<T: Real>(curve: &DpdCurve<T>, led: &LedPolynomial<T>, lo: T, hi: T, points: usize) -> T {
    let xs: Vec<T> = (0..points)
        .map(|k| lo + (hi - lo) * T::from_count(k) / T::from_count(points - 1))
        .collect();
    let ys: Vec<T> = xs.iter().map(|&i| led.eval_unchecked(curve.eval(i))).collect();
    let (m, q) = fit::linear_fit(&xs, &ys);
    let ss = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| (y - m * x - q) * (y - m * x - q))
        .sum::<T>();
    let rms = (ss / T::from_count(points)).sqrt();
    let (ymin, ymax) = ys
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(a, b), &y| (a.min(y), b.max(y)));
    rms / (ymax - ymin)
}

/// Quadratic coefficient of the composed response, for the sign of the
/// residual curvature.
pub fn composed_curvature<T: Real>(curve: &DpdCurve<T>, led: &LedPolynomial<T>, lo: T, hi: T) -> Result<T> {
    let xs: Vec<T> = (0..101)
        .map(|k| lo + (hi - lo) * T::from_count(k) / T::lit(100.0))
        .collect();
    let ys: Vec<T> = xs.iter().map(|&i| led.eval_unchecked(curve.eval(i))).collect();
    Ok(polyfit2(&xs, &ys)?.a)
}
