//! Monte Carlo BER experiments over the full link and their CSV artifacts.

mod campaign;
mod chain;
mod config;
mod output;
pub mod stats;

pub use campaign::{
    curve_key, run_campaign, run_distance_campaign, run_figure10_campaign, run_figure7_campaign,
    CampaignKind, CampaignPlan, CampaignResult,
};
pub use chain::{
    run_ber_point, snr_from_distance, Axis, BerRecord, PointOutcome, PointSpec, PreparedLink,
    Reception, Scenario,
};
pub use config::{
    DpdConfig, DpdScheme, Equalization, GeometryConfig, LedConfig, MonteCarloConfig, NoiseSection,
    OfdmSection, OutputConfig, PreEqConfig, ReceiverConfig, ResponseConfig, ResponseKind,
    SimConfig, SweepConfig,
};
pub use output::{emit_artifacts, write_ber_csv, RunStatus, BER_HEADER};
