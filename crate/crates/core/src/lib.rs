//! Baseband simulator for a DC-biased optical OFDM visible-light link with a
//! temperature-dependent high-power LED, feedback-driven digital
//! pre-distortion and frequency-domain pre-equalization.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`);
//! the `*F64` aliases below are what the simulator itself uses.

pub mod channel;
pub mod error;
pub mod led;
pub mod noise;
pub mod ofdm;
pub mod predistortion;
pub mod preeq;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;

pub type Vec3F64 = channel::Vec3<f64>;
pub type LinkGeometryF64 = channel::LinkGeometry<f64>;
pub type LedModelF64 = led::LedModel<f64>;
pub type LedPolynomialF64 = led::LedPolynomial<f64>;
pub type FrequencyResponseF64 = led::FrequencyResponse<f64>;
pub type NoiseParamsF64 = noise::NoiseParams<f64>;
pub type OfdmConfigF64 = ofdm::OfdmConfig<f64>;
pub type ModemF64 = ofdm::Modem<f64>;
pub type DpdCurveF64 = predistortion::DpdCurve<f64>;
pub type GainVectorF64 = preeq::GainVector<f64>;
