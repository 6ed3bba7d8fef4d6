use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{LinkGeometry, Vec3};
use crate::error::{Error, Result};
use crate::led::{
    default_lowpass_response, FrequencyResponse, LedModel, DEFAULT_LED_CUTOFF_HZ,
    DEFAULT_TIA_BANDWIDTH_HZ,
};
use crate::noise::NoiseParams;
use crate::ofdm::OfdmConfig;
use crate::predistortion::CalibrationSettings;

/// Whole simulator configuration. Every field has a default, so an empty
/// file describes the reference setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub geometry: GeometryConfig,
    pub led: LedConfig,
    pub response: ResponseConfig,
    pub ofdm: OfdmSection,
    pub noise: NoiseSection,
    pub receiver: ReceiverConfig,
    pub dpd: DpdConfig,
    pub preeq: PreEqConfig,
    pub monte_carlo: MonteCarloConfig,
    pub output: OutputConfig,
    pub fig7: SweepConfig,
    pub fig10: SweepConfig,
    pub distance: SweepConfig,
    pub custom: SweepConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            geometry: GeometryConfig::default(),
            led: LedConfig::default(),
            response: ResponseConfig::default(),
            ofdm: OfdmSection::default(),
            noise: NoiseSection::default(),
            receiver: ReceiverConfig::default(),
            dpd: DpdConfig::default(),
            preeq: PreEqConfig::default(),
            monte_carlo: MonteCarloConfig::default(),
            output: OutputConfig::default(),
            fig7: SweepConfig::default(),
            fig10: SweepConfig::default(),
            distance: SweepConfig::default(),
            custom: SweepConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "config",
            detail: e.to_string(),
        })?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        fix(&mut self.led.model_csv);
        fix(&mut self.response.csv);
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "config",
            detail: e.to_string(),
        })
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml_string()?.as_bytes())))
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.build()?;
        self.led.build()?;
        self.response.build(self.ofdm.bandwidth_hz)?;
        self.ofdm_config(self.ofdm.mod_order, self.ofdm.n_suppressed).validate()?;
        self.noise.build().validate()?;
        self.dpd.calibration.validate()?;
        self.monte_carlo.validate()?;
        if self.receiver.pilot_frames == 0 {
            return Err(Error::InvalidConfig("receiver.pilot_frames must be >= 1".into()));
        }
        if !(self.receiver.transimpedance_ohm > 0.0) {
            return Err(Error::InvalidConfig("receiver.transimpedance_ohm must be > 0".into()));
        }
        if self.preeq.probe_frames == 0 {
            return Err(Error::InvalidConfig("preeq.probe_frames must be >= 1".into()));
        }
        Ok(())
    }

    pub fn ofdm_config(&self, mod_order: usize, n_suppressed: usize) -> OfdmConfig<f64> {
        OfdmConfig {
            n_fft: self.ofdm.n_fft,
            n_cp: self.ofdm.n_cp,
            mod_order,
            clip_hi: self.ofdm.clip_hi,
            clip_lo: self.ofdm.clip_lo,
            clip_factor: self.ofdm.clip_factor,
            n_suppressed,
            bandwidth_hz: self.ofdm.bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub led_pos: [f64; 3],
    pub led_normal: [f64; 3],
    pub rx_pos: [f64; 3],
    pub rx_normal: [f64; 3],
    pub fb_pos: [f64; 3],
    pub fb_normal: [f64; 3],
    pub lambert_order: f64,
    pub pd_area_m2: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            led_pos: [2.0, 2.0, 3.0],
            led_normal: [0.0, 0.0, -1.0],
            rx_pos: [2.0, 2.0, 1.0],
            rx_normal: [0.0, 0.0, 1.0],
            fb_pos: [1.98, 2.0, 2.98],
            fb_normal: [h, 0.0, h],
            lambert_order: 0.5,
            pd_area_m2: 1e-6,
        }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<LinkGeometry<f64>> {
        LinkGeometry::new(
            Vec3::from_f64(self.led_pos),
            Vec3::from_f64(self.led_normal),
            Vec3::from_f64(self.rx_pos),
            Vec3::from_f64(self.rx_normal),
            Vec3::from_f64(self.fb_pos),
            Vec3::from_f64(self.fb_normal),
            self.lambert_order,
            self.pd_area_m2,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedConfig {
    /// `temp_c,a2,a1,a0` table replacing the built-in characterization.
    pub model_csv: Option<PathBuf>,
    /// Temperature-independent `[a2, a1, a0]` polynomial; wins over the table.
    pub polynomial: Option<[f64; 3]>,
    /// Valid drive current range, A.
    pub current_range: [f64; 2],
    /// Static bias added to the modulation current, A.
    pub bias_current: f64,
    /// Allows LED temperatures outside the table span.
    pub allow_extrapolation: bool,
}

impl Default for LedConfig {
    fn default() -> Self {
        Self {
            model_csv: None,
            polynomial: None,
            current_range: [0.0, 0.35],
            bias_current: 0.175,
            allow_extrapolation: false,
        }
    }
}

impl LedConfig {
    pub fn build(&self) -> Result<LedModel<f64>> {
        let mut model = match (&self.polynomial, &self.model_csv) {
            (Some([a2, a1, a0]), _) => LedModel::constant(*a2, *a1, *a0),
            (None, Some(path)) => LedModel::load_csv(path)?,
            (None, None) => LedModel::multicomp_1w(),
        };
        model.allow_extrapolation |= self.allow_extrapolation;
        model.with_current_range(self.current_range[0], self.current_range[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Flat,
    Lowpass,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseConfig {
    pub kind: ResponseKind,
    /// `freq_hz,magnitude_db,phase_deg` table, used when `kind = "csv"`.
    pub csv: Option<PathBuf>,
    pub led_cutoff_hz: f64,
    pub tia_bandwidth_hz: f64,
    /// Samples of the parametric response up to 1.2× the OFDM bandwidth.
    pub points: usize,
}

impl Default for ResponseConfig {
    fn default() -> Self {
        Self {
            kind: ResponseKind::Flat,
            csv: None,
            led_cutoff_hz: DEFAULT_LED_CUTOFF_HZ,
            tia_bandwidth_hz: DEFAULT_TIA_BANDWIDTH_HZ,
            points: 1024,
        }
    }
}

impl ResponseConfig {
    pub fn lowpass() -> Self {
        Self {
            kind: ResponseKind::Lowpass,
            ..Self::default()
        }
    }

    pub fn build(&self, bandwidth_hz: f64) -> Result<FrequencyResponse<f64>> {
        match self.kind {
            ResponseKind::Flat => Ok(FrequencyResponse::flat()),
            ResponseKind::Lowpass => default_lowpass_response(
                self.led_cutoff_hz,
                self.tia_bandwidth_hz,
                self.points,
                1.2 * bandwidth_hz,
            ),
            ResponseKind::Csv => match &self.csv {
                Some(p) => FrequencyResponse::load_csv(p),
                None => Err(Error::InvalidConfig(
                    "response.kind = \"csv\" needs response.csv".into(),
                )),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmSection {
    pub n_fft: usize,
    pub n_cp: usize,
    pub mod_order: usize,
    pub clip_hi: f64,
    pub clip_lo: f64,
    pub clip_factor: f64,
    pub n_suppressed: usize,
    pub bandwidth_hz: f64,
}

impl Default for OfdmSection {
    fn default() -> Self {
        let c = OfdmConfig::<f64>::default();
        Self {
            n_fft: c.n_fft,
            n_cp: c.n_cp,
            mod_order: c.mod_order,
            clip_hi: c.clip_hi,
            clip_lo: c.clip_lo,
            clip_factor: c.clip_factor,
            n_suppressed: c.n_suppressed,
            bandwidth_hz: c.bandwidth_hz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub bandwidth_hz: f64,
    pub responsivity: f64,
    pub pd_area_m2: f64,
    pub background_irradiance: f64,
    pub optical_filter_bw_nm: f64,
    pub dark_current: f64,
    pub temp_kelvin: f64,
    pub open_loop_gain: f64,
    pub pd_cap_per_area: f64,
    pub fet_noise_factor: f64,
    pub fet_transconductance: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        let p = NoiseParams::<f64>::default();
        Self {
            bandwidth_hz: p.bandwidth_hz,
            responsivity: p.responsivity,
            pd_area_m2: p.pd_area,
            background_irradiance: p.background_irradiance,
            optical_filter_bw_nm: p.optical_filter_bw_nm,
            dark_current: p.dark_current,
            temp_kelvin: p.temp_kelvin,
            open_loop_gain: p.open_loop_gain,
            pd_cap_per_area: p.pd_cap_per_area,
            fet_noise_factor: p.fet_noise_factor,
            fet_transconductance: p.fet_transconductance,
        }
    }
}

impl NoiseSection {
    pub fn build(&self) -> NoiseParams<f64> {
        let mut p = NoiseParams::default();
        p.bandwidth_hz = self.bandwidth_hz;
        p.responsivity = self.responsivity;
        p.pd_area = self.pd_area_m2;
        p.background_irradiance = self.background_irradiance;
        p.optical_filter_bw_nm = self.optical_filter_bw_nm;
        p.dark_current = self.dark_current;
        p.temp_kelvin = self.temp_kelvin;
        p.open_loop_gain = self.open_loop_gain;
        p.pd_cap_per_area = self.pd_cap_per_area;
        p.fet_noise_factor = self.fet_noise_factor;
        p.fet_transconductance = self.fet_transconductance;
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReceiverConfig {
    pub transimpedance_ohm: f64,
    /// Known pilot frames preceding each burst.
    pub pilot_frames: usize,
    /// Receive the pilots without noise (perfect channel knowledge).
    pub noiseless_pilot: bool,
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            transimpedance_ohm: 32e3,
            pilot_frames: 1,
            noiseless_pilot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpdConfig {
    /// Calibration temperature of the fixed pre-distorter, °C.
    pub fixed_calib_temp_c: f64,
    /// Calibrate from a noiseless feedback photodiode.
    pub noiseless_feedback: bool,
    pub calibration: CalibrationSettings,
}

impl Default for DpdConfig {
    fn default() -> Self {
        Self {
            fixed_calib_temp_c: 50.0,
            noiseless_feedback: false,
            calibration: CalibrationSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreEqConfig {
    pub probe_frames: usize,
    pub epsilon_db: f64,
    pub noiseless_feedback: bool,
}

impl Default for PreEqConfig {
    fn default() -> Self {
        Self {
            probe_frames: 4,
            epsilon_db: crate::preeq::DEFAULT_EPSILON_DB,
            noiseless_feedback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    /// Stop a point once this many bit errors were counted.
    pub target_bit_errors: u64,
    /// Stop a point after this many bits; such points are censored.
    pub max_bits: u64,
    /// Data frames sent after each pilot.
    pub frames_per_burst: usize,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            target_bit_errors: 200,
            max_bits: 20_000_000,
            frames_per_burst: 8,
        }
    }
}

impl MonteCarloConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_bit_errors < 100 {
            return Err(Error::InvalidConfig(format!(
                "monte_carlo.target_bit_errors must be >= 100, got {}",
                self.target_bit_errors
            )));
        }
        if self.max_bits == 0 || self.frames_per_burst == 0 {
            return Err(Error::InvalidConfig(
                "monte_carlo.max_bits and frames_per_burst must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Dump one equalized frame at the last axis point of every curve.
    pub constellations: bool,
    /// Dump gain and received spectra of every curve.
    pub spectra: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            constellations: true,
            spectra: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DpdScheme {
    #[serde(rename = "w-dpd")]
    None,
    #[serde(rename = "f-dpd")]
    Fixed,
    #[serde(rename = "lfb-dpd")]
    Feedback,
}

impl DpdScheme {
    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "w-dpd",
            Self::Fixed => "f-dpd",
            Self::Feedback => "lfb-dpd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Equalization {
    #[serde(rename = "post-eq")]
    Post,
    #[serde(rename = "pp-eq")]
    PrePost,
}

impl Equalization {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Post => "post-eq",
            Self::PrePost => "pp-eq",
        }
    }
}

/// Scheme matrix and grids of one campaign. Unset fields take the
/// campaign's own defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub schemes: Option<Vec<DpdScheme>>,
    pub equalization: Option<Vec<Equalization>>,
    pub temps_c: Option<Vec<f64>>,
    pub mod_orders: Option<Vec<usize>>,
    pub snr_db: Option<Vec<f64>>,
    pub distance_m: Option<Vec<f64>>,
    pub response: Option<ResponseConfig>,
    pub n_suppressed: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_reference_setup() {
        let cfg = SimConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, SimConfig::default());
        cfg.validate().unwrap();
        assert_eq!(cfg.ofdm.n_fft, 1024);
        assert_eq!(cfg.geometry.fb_pos, [1.98, 2.0, 2.98]);
        assert_eq!(cfg.noise.temp_kelvin, 295.0);
    }

    #[test]
    fn serialization_round_trip_and_stable_hash() {
        let mut cfg = SimConfig::default();
        cfg.fig7.snr_db = Some(vec![10.0, 20.0]);
        cfg.custom.schemes = Some(vec![DpdScheme::Feedback]);
        let text = cfg.to_toml_string().unwrap();
        let back = SimConfig::from_toml_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash().unwrap(), cfg.hash().unwrap());
        let other = SimConfig { seed: 2, ..cfg.clone() };
        assert_ne!(other.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn parses_scheme_names() {
        let cfg = SimConfig::from_toml_str(
            r#"
            seed = 9
            [custom]
            schemes = ["w-dpd", "f-dpd", "lfb-dpd"]
            equalization = ["post-eq", "pp-eq"]
            snr_db = [5.0]
            [custom.response]
            kind = "lowpass"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.custom.schemes.unwrap().len(), 3);
        assert_eq!(cfg.custom.response.unwrap().kind, ResponseKind::Lowpass);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(SimConfig::from_toml_str("[ofdm]\nnfft = 3").is_err());
        let cfg = SimConfig::from_toml_str("[monte_carlo]\ntarget_bit_errors = 10").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = SimConfig::from_toml_str("[ofdm]\nmod_order = 8").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = SimConfig::from_toml_str("[response]\nkind = \"csv\"").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "[led]\nmodel_csv = \"led.csv\"\n").unwrap();
        let cfg = SimConfig::load(&path).unwrap();
        assert_eq!(cfg.led.model_csv.unwrap(), dir.path().join("led.csv"));
    }

    #[test]
    fn extrapolation_flag_reaches_the_model() {
        let model = LedConfig::default().build().unwrap();
        assert!(model.at_temperature(110.0).is_err());
        let cfg = SimConfig::from_toml_str("[led]\nallow_extrapolation = true").unwrap();
        assert!(cfg.led.build().unwrap().at_temperature(110.0).is_ok());
    }
}
