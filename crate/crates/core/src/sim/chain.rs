use num_complex::Complex;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{DpdScheme, Equalization, ResponseConfig, SimConfig};
use super::stats::wilson_interval;
use crate::channel::{gain_from_vectors, Link, LinkGeometry};
use crate::error::{Error, Result};
use crate::led::{FrequencyResponse, LedModel, LedPolynomial};
use crate::noise::NoiseParams;
use crate::ofdm::{prepend_cp, Modem, TimeFrame, ZfPostEqualizer};
use crate::predistortion::{calibrate, make_fixed_dpd, DpdCurve, LedFeedbackSampler};
use crate::preeq::{estimate_feedback, zf_gains_with_threshold, GainVector};

type C64 = Complex<f64>;

/// Horizontal axis of a BER curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Axis {
    /// Electrical SNR over the active subcarriers, dB.
    Snr(f64),
    /// Transmitter to remote receiver distance, m; noise from the physical
    /// receiver model.
    Distance(f64),
}

/// One point of a BER curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSpec {
    pub scheme: DpdScheme,
    pub equalization: Equalization,
    pub temp_c: f64,
    pub mod_order: usize,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BerRecord {
    pub scheme: DpdScheme,
    /// Calibration temperature of a fixed pre-distorter.
    pub dpd_calib_temp_c: Option<f64>,
    pub equalization: Equalization,
    pub mod_order: usize,
    pub temp_c: f64,
    pub snr_db: f64,
    pub distance_m: Option<f64>,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub censored: bool,
    pub seed: u64,
    pub stream: u64,
}

impl BerRecord {
    pub fn ber(&self) -> f64 {
        if self.bits_sent == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_sent as f64
        }
    }

    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits_sent, 1.959964)
    }
}

/// Everything a point produces.
#[derive(Debug, Clone)]
pub struct PointOutcome {
    pub record: BerRecord,
    pub dpd: DpdCurve<f64>,
    pub gains: GainVector<f64>,
    /// Channel response per DFT bin.
    pub channel: Vec<C64>,
    /// Equalized symbols of the last data frame, one per active subcarrier.
    pub constellation: Vec<C64>,
}

/// Shared, immutable setup of a campaign.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SimConfig,
    pub geometry: LinkGeometry<f64>,
    pub led: LedModel<f64>,
    pub response: FrequencyResponse<f64>,
    pub noise: NoiseParams<f64>,
    pub n_suppressed: usize,
}

impl Scenario {
    pub fn new(config: &SimConfig, response: &ResponseConfig, n_suppressed: usize) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            geometry: config.geometry.build()?,
            led: config.led.build()?,
            response: response.build(config.ofdm.bandwidth_hz)?,
            noise: config.noise.build(),
            n_suppressed,
            config: config.clone(),
        })
    }

    /// Electrical SNR at the remote receiver for a given distance.
    pub fn snr_at_distance(&self, distance: f64, temp_c: f64) -> Result<f64> {
        let c = &self.config;
        snr_from_distance(
            &self.geometry,
            &self.led,
            &self.noise,
            distance,
            temp_c,
            c.led.bias_current,
            c.ofdm_config(c.ofdm.mod_order, self.n_suppressed).sigma_x(),
        )
    }
}

/// Small-signal electrical SNR of the remote link with the photodiode moved
/// to `distance` along the LED axis: signal `(R·Ω·dP/dI·σ_x)²` over the
/// shot plus thermal variance at the mean received power.
pub fn snr_from_distance(
    geometry: &LinkGeometry<f64>,
    led: &LedModel<f64>,
    noise: &NoiseParams<f64>,
    distance: f64,
    temp_c: f64,
    bias_current: f64,
    sigma_x: f64,
) -> Result<f64> {
    let omega = gain_from_vectors(&geometry.with_remote_distance(distance)?, Link::Remote)?;
    let poly = led.at_temperature(temp_c)?;
    let p_bias = poly.power(bias_current)?;
    let signal = (noise.responsivity * omega * poly.slope(bias_current) * sigma_x).powi(2);
    let var = noise.total_variance(omega * p_bias)?;
    Ok(10.0 * (signal / var).log10())
}

/// Modulation current through pre-distortion and the LED to optical power.
fn emit(dpd: &DpdCurve<f64>, led: &LedPolynomial<f64>, frame: &TimeFrame<f64>) -> Vec<f64> {
    frame
        .samples
        .iter()
        .map(|&i| led.eval_unchecked(dpd.eval(i)))
        .collect()
}

fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let word = rng.next_u64();
        let take = (n - bits.len()).min(64);
        bits.extend((0..take).map(|b| ((word >> b) & 1) as u8));
    }
    bits
}

fn complex_gaussian(rng: &mut ChaCha8Rng, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

/// Transmitter and remote channel of one point after pre-distortion
/// calibration and gain estimation.
#[derive(Debug, Clone)]
pub struct PreparedLink {
    pub modem: Modem<f64>,
    pub dpd: DpdCurve<f64>,
    pub led: LedPolynomial<f64>,
    pub gains: GainVector<f64>,
    /// Channel response per DFT bin.
    pub channel: Vec<C64>,
    /// Optical power to receiver signal units: photocurrent per watt in
    /// distance mode, 1 in SNR mode.
    pub rx_scale: f64,
    /// Remote geometric gain in distance mode.
    pub remote_gain: Option<f64>,
    pub snr_db: f64,
}

/// Noiseless reception of one frame.
#[derive(Debug, Clone)]
pub struct Reception {
    /// Received active-bin symbols.
    pub symbols: Vec<C64>,
    /// Mean emitted optical power over the frame body, W.
    pub mean_power: f64,
}

impl PreparedLink {
    /// Calibrates the pre-distorter and, for pre-equalized schemes, runs the
    /// probe protocol over the feedback photodiode.
    pub fn new(scenario: &Scenario, point: &PointSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        let cfg = &scenario.config;
        let ofdm = cfg.ofdm_config(point.mod_order, scenario.n_suppressed);
        let modem = Modem::new(ofdm)?;
        let n = ofdm.n_fft;
        let led = scenario.led.at_temperature(point.temp_c)?;
        let responsivity = scenario.noise.responsivity;
        let z_tia = cfg.receiver.transimpedance_ohm;
        let omega_fb = gain_from_vectors(&scenario.geometry, Link::Feedback)?;

        let calib = cfg.dpd.calibration;
        let dpd = match point.scheme {
            DpdScheme::None => DpdCurve::passthrough(cfg.led.bias_current),
            DpdScheme::Fixed => make_fixed_dpd(&scenario.led, cfg.dpd.fixed_calib_temp_c, &calib)?,
            DpdScheme::Feedback => {
                let sampler = LedFeedbackSampler::noiseless(led.clone(), omega_fb, responsivity, z_tia);
                let mut sampler = if cfg.dpd.noiseless_feedback {
                    sampler
                } else {
                    sampler.with_noise(scenario.noise, z_tia, ChaCha8Rng::from_rng(&mut *rng))
                };
                calibrate(&mut sampler, &calib)?
            }
        };
        let range = scenario.led.current_range;
        for edge in [ofdm.clip_lo, ofdm.clip_hi] {
            let d = dpd.eval(edge);
            if !(d >= range.0 && d <= range.1) {
                return Err(Error::Calibration(format!(
                    "{} drive reaches {d} A at {edge} A, outside [{}, {}] A",
                    point.scheme.label(),
                    range.0,
                    range.1
                )));
            }
        }
        if !dpd.is_monotone(ofdm.clip_lo, ofdm.clip_hi) {
            return Err(Error::Calibration(format!(
                "{} drive curve is not increasing",
                point.scheme.label()
            )));
        }

        let mut channel = vec![C64::new(0.0, 0.0); n];
        channel[0] = C64::new(1.0, 0.0);
        for k in 1..n / 2 {
            channel[k] = scenario.response.at(ofdm.bin_frequency(k));
            channel[n - k] = channel[k].conj();
        }

        let gains = match point.equalization {
            Equalization::Post => GainVector::flat(&ofdm)?,
            Equalization::PrePost => {
                let mut fb_rng = ChaCha8Rng::from_rng(&mut *rng);
                let noiseless = cfg.preeq.noiseless_feedback;
                let noise = scenario.noise;
                let scale = omega_fb * responsivity * z_tia;
                let mut link = |frame: &TimeFrame<f64>| -> Result<Vec<f64>> {
                    let p = emit(&dpd, &led, frame);
                    let spec = modem.spectrum(&p)?;
                    let shaped: Vec<C64> = spec.iter().zip(&channel).map(|(s, h)| s * h * scale).collect();
                    let mut body = modem.transform().inverse_real(&shaped)?;
                    if !noiseless {
                        let mean_p = p.iter().sum::<f64>() / p.len() as f64;
                        let std = z_tia * noise.total_noise_std(omega_fb * mean_p)?;
                        for v in &mut body {
                            *v += std * fb_rng.sample::<f64, _>(StandardNormal);
                        }
                    }
                    Ok(prepend_cp(&body, ofdm.n_cp, ofdm.sample_rate_hz())?.samples)
                };
                let feedback = estimate_feedback(&modem, &mut link, cfg.preeq.probe_frames, rng)?;
                let g = zf_gains_with_threshold(&feedback, &ofdm, cfg.preeq.epsilon_db)?;
                if !g.excluded.is_empty() {
                    return Err(Error::Unequalizable { bins: g.excluded });
                }
                g
            }
        };

        let (rx_scale, remote_gain, snr_db) = match point.axis {
            Axis::Snr(db) => (1.0, None, db),
            Axis::Distance(d) => {
                let geom = scenario.geometry.with_remote_distance(d)?;
                let omega = gain_from_vectors(&geom, Link::Remote)?;
                (responsivity * omega, Some(omega), scenario.snr_at_distance(d, point.temp_c)?)
            }
        };

        Ok(Self {
            modem,
            dpd,
            led,
            gains,
            channel,
            rx_scale,
            remote_gain,
            snr_db,
        })
    }

    /// Sends one frame of data symbols and returns the noiseless received
    /// active-bin symbols.
    pub fn transmit(&self, symbols: &[C64]) -> Result<Reception> {
        let ofdm = self.modem.config();
        let frame = self.modem.modulate(symbols, self.gains.as_slice())?;
        let p = emit(&self.dpd, &self.led, &frame);
        let spec = self.modem.spectrum(&p)?;
        Ok(Reception {
            symbols: ofdm
                .active_bins()
                .map(|k| spec[k] * self.channel[k] * self.rx_scale)
                .collect(),
            mean_power: p[ofdm.n_cp..].iter().sum::<f64>() / ofdm.n_fft as f64,
        })
    }
}

/// Runs one BER point on its own random stream `(seed, stream)`.
///
/// Each burst carries `pilot_frames` known frames followed by
/// `frames_per_burst` data frames. Receiver noise is white in time, so on
/// the data bins it is drawn directly as circular complex Gaussian with
/// variance `N·σ²`. In SNR mode `σ²` follows from the mean received power of
/// the burst's data frames; in distance mode from the receiver noise model.
pub fn run_ber_point(scenario: &Scenario, point: &PointSpec, stream: u64) -> Result<PointOutcome> {
    let cfg = &scenario.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    let link = PreparedLink::new(scenario, point, &mut rng)?;
    let ofdm = *link.modem.config();
    let n = ofdm.n_fft as f64;

    let mc = &cfg.monte_carlo;
    let qam = *link.modem.qam();
    let bits_per_frame = ofdm.bits_per_frame();
    let n_pilot = cfg.receiver.pilot_frames;
    let total = n_pilot + mc.frames_per_burst;
    let mut bits_sent = 0u64;
    let mut bit_errors = 0u64;
    let mut constellation = Vec::new();

    while bit_errors < mc.target_bit_errors && bits_sent < mc.max_bits {
        let mut tx_bits = Vec::with_capacity(total);
        let mut tx_syms = Vec::with_capacity(total);
        let mut clean = Vec::with_capacity(total);
        let mut noise_var = Vec::with_capacity(total);
        for _ in 0..total {
            let bits = random_bits(&mut rng, bits_per_frame);
            let syms = qam.modulate::<f64>(&bits)?;
            let rx = link.transmit(&syms)?;
            if let Some(omega) = link.remote_gain {
                noise_var.push(n * scenario.noise.total_variance(omega * rx.mean_power)?);
            }
            tx_bits.push(bits);
            tx_syms.push(syms);
            clean.push(rx.symbols);
        }
        if link.remote_gain.is_none() {
            let ms = clean[n_pilot..]
                .iter()
                .flat_map(|f| f.iter().map(|v| v.norm_sqr()))
                .sum::<f64>()
                / (mc.frames_per_burst * ofdm.n_active()) as f64;
            noise_var = vec![ms / 10f64.powf(link.snr_db / 10.0); total];
        }
        let mut rx: Vec<Vec<C64>> = Vec::with_capacity(total);
        for (f, (s, var)) in clean.into_iter().zip(&noise_var).enumerate() {
            if f < n_pilot && cfg.receiver.noiseless_pilot {
                rx.push(s);
            } else {
                rx.push(s.into_iter().map(|v| v + complex_gaussian(&mut rng, *var)).collect());
            }
        }
        let eq = ZfPostEqualizer::from_pilots(&rx[..n_pilot], &tx_syms[..n_pilot])?;
        for f in n_pilot..total {
            let y = eq.apply(&rx[f])?;
            let decided = qam.demodulate(&y);
            bit_errors += decided.iter().zip(&tx_bits[f]).filter(|(a, b)| a != b).count() as u64;
            bits_sent += bits_per_frame as u64;
            if f == total - 1 {
                constellation = y;
            }
        }
    }

    let record = BerRecord {
        scheme: point.scheme,
        dpd_calib_temp_c: match point.scheme {
            DpdScheme::Fixed => Some(cfg.dpd.fixed_calib_temp_c),
            _ => None,
        },
        equalization: point.equalization,
        mod_order: point.mod_order,
        temp_c: point.temp_c,
        snr_db: link.snr_db,
        distance_m: match point.axis {
            Axis::Distance(d) => Some(d),
            Axis::Snr(_) => None,
        },
        bits_sent,
        bit_errors,
        censored: bit_errors < mc.target_bit_errors,
        seed: cfg.seed,
        stream,
    };
    Ok(PointOutcome {
        record,
        dpd: link.dpd,
        gains: link.gains,
        channel: link.channel,
        constellation,
    })
}
