use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::chain::{run_ber_point, Axis, BerRecord, PointOutcome, PointSpec, Scenario};
use super::config::{DpdScheme, Equalization, ResponseConfig, SimConfig, SweepConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CampaignKind {
    /// Pre-distortion schemes across LED temperatures, flat channel.
    Fig7,
    /// Pre+post vs post equalization on the low-pass channel.
    Fig10,
    /// Physical noise over the transmitter-receiver distance.
    Distance,
    /// Entirely from the `[custom]` table.
    Custom,
}

impl CampaignKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fig7 => "fig7",
            Self::Fig10 => "fig10",
            Self::Distance => "distance",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for CampaignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CampaignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig7" => Ok(Self::Fig7),
            "fig10" => Ok(Self::Fig10),
            "distance" => Ok(Self::Distance),
            "custom" => Ok(Self::Custom),
            other => Err(Error::InvalidConfig(format!(
                "unknown campaign '{other}' (expected fig7, fig10, distance or custom)"
            ))),
        }
    }
}

/// A resolved campaign: shared scenario plus the ordered point list. A
/// point's position is its random stream.
#[derive(Debug, Clone)]
pub struct CampaignPlan {
    pub kind: CampaignKind,
    pub scenario: Scenario,
    pub points: Vec<PointSpec>,
}

fn step_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|i| start + step * i as f64).collect()
}

struct Preset {
    schemes: Vec<DpdScheme>,
    equalization: Vec<Equalization>,
    temps_c: Vec<f64>,
    mod_orders: Vec<usize>,
    snr_db: Option<Vec<f64>>,
    distance_m: Option<Vec<f64>>,
    response: ResponseConfig,
    n_suppressed: usize,
}

fn preset(kind: CampaignKind, cfg: &SimConfig) -> Preset {
    match kind {
        CampaignKind::Fig7 => Preset {
            schemes: vec![DpdScheme::None, DpdScheme::Fixed, DpdScheme::Feedback],
            equalization: vec![Equalization::Post],
            temps_c: vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0],
            mod_orders: vec![16, 64, 256],
            snr_db: Some(step_grid(0.0, 40.0, 5.0)),
            distance_m: None,
            response: ResponseConfig::default(),
            n_suppressed: 0,
        },
        CampaignKind::Fig10 => Preset {
            schemes: vec![DpdScheme::Feedback],
            equalization: vec![Equalization::Post, Equalization::PrePost],
            temps_c: vec![25.0],
            mod_orders: vec![16, 64, 256],
            snr_db: Some(step_grid(0.0, 50.0, 5.0)),
            distance_m: None,
            response: ResponseConfig::lowpass(),
            n_suppressed: 0,
        },
        CampaignKind::Distance => Preset {
            schemes: vec![DpdScheme::Feedback],
            equalization: vec![Equalization::Post, Equalization::PrePost],
            temps_c: vec![25.0],
            mod_orders: vec![4, 16, 64],
            snr_db: None,
            distance_m: Some(step_grid(0.4, 1.1, 0.1)),
            response: ResponseConfig::lowpass(),
            n_suppressed: 100,
        },
        CampaignKind::Custom => Preset {
            schemes: vec![DpdScheme::Feedback],
            equalization: vec![Equalization::Post],
            temps_c: vec![25.0],
            mod_orders: vec![cfg.ofdm.mod_order],
            snr_db: None,
            distance_m: None,
            response: cfg.response.clone(),
            n_suppressed: cfg.ofdm.n_suppressed,
        },
    }
}

impl CampaignPlan {
    pub fn new(config: &SimConfig, kind: CampaignKind) -> Result<Self> {
        let sweep: &SweepConfig = match kind {
            CampaignKind::Fig7 => &config.fig7,
            CampaignKind::Fig10 => &config.fig10,
            CampaignKind::Distance => &config.distance,
            CampaignKind::Custom => &config.custom,
        };
        let d = preset(kind, config);
        let schemes = sweep.schemes.clone().unwrap_or(d.schemes);
        let eqs = sweep.equalization.clone().unwrap_or(d.equalization);
        let temps = sweep.temps_c.clone().unwrap_or(d.temps_c);
        let orders = sweep.mod_orders.clone().unwrap_or(d.mod_orders);
        let response = sweep.response.clone().unwrap_or(d.response);
        let n_suppressed = sweep.n_suppressed.unwrap_or(d.n_suppressed);

        let axis: Vec<Axis> = match (&sweep.snr_db, &sweep.distance_m) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "[{kind}] sets both snr_db and distance_m"
                )))
            }
            (Some(s), None) => s.iter().map(|&v| Axis::Snr(v)).collect(),
            (None, Some(m)) => m.iter().map(|&v| Axis::Distance(v)).collect(),
            (None, None) => match (d.snr_db, d.distance_m) {
                (Some(s), _) => s.into_iter().map(Axis::Snr).collect(),
                (None, Some(m)) => m.into_iter().map(Axis::Distance).collect(),
                (None, None) => {
                    return Err(Error::InvalidConfig(format!(
                        "[{kind}] needs snr_db or distance_m"
                    )))
                }
            },
        };
        if schemes.is_empty() || eqs.is_empty() || temps.is_empty() || orders.is_empty() {
            log::warn!("[{kind}] has an empty scheme matrix, nothing to run");
        }
        for &m in &orders {
            config.ofdm_config(m, n_suppressed).validate()?;
        }

        let scenario = Scenario::new(config, &response, n_suppressed)?;
        let mut points = Vec::new();
        for &mod_order in &orders {
            for &scheme in &schemes {
                for &equalization in &eqs {
                    for &temp_c in &temps {
                        for &ax in &axis {
                            points.push(PointSpec {
                                scheme,
                                equalization,
                                temp_c,
                                mod_order,
                                axis: ax,
                            });
                        }
                    }
                }
            }
        }
        Ok(Self {
            kind,
            scenario,
            points,
        })
    }
}

/// Curve identity of a point: everything but the axis.
pub fn curve_key(p: &PointSpec) -> String {
    format!(
        "{}_{}_m{}_t{}",
        p.scheme.label(),
        p.equalization.label(),
        p.mod_order,
        p.temp_c
    )
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    pub kind: CampaignKind,
    pub config: SimConfig,
    pub points: Vec<PointSpec>,
    pub outcomes: Vec<PointOutcome>,
}

impl CampaignResult {
    pub fn records(&self) -> Vec<BerRecord> {
        self.outcomes.iter().map(|o| o.record.clone()).collect()
    }
}

/// Runs every point of the plan on `jobs` worker threads (all cores when
/// `None`). Output order is the plan order regardless of scheduling.
pub fn run_campaign(plan: &CampaignPlan, jobs: Option<usize>) -> Result<CampaignResult> {
    let run = || -> Result<Vec<PointOutcome>> {
        plan.points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let out = run_ber_point(&plan.scenario, p, i as u64);
                if let Ok(o) = &out {
                    log::info!(
                        "{} {} {:?}: {} errors / {} bits",
                        plan.kind,
                        curve_key(p),
                        p.axis,
                        o.record.bit_errors,
                        o.record.bits_sent
                    );
                }
                out
            })
            .collect()
    };
    let outcomes = match jobs {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    Ok(CampaignResult {
        kind: plan.kind,
        config: plan.scenario.config.clone(),
        points: plan.points.clone(),
        outcomes,
    })
}

pub fn run_figure7_campaign(config: &SimConfig, jobs: Option<usize>) -> Result<CampaignResult> {
    run_campaign(&CampaignPlan::new(config, CampaignKind::Fig7)?, jobs)
}

pub fn run_figure10_campaign(config: &SimConfig, jobs: Option<usize>) -> Result<CampaignResult> {
    run_campaign(&CampaignPlan::new(config, CampaignKind::Fig10)?, jobs)
}

pub fn run_distance_campaign(config: &SimConfig, jobs: Option<usize>) -> Result<CampaignResult> {
    run_campaign(&CampaignPlan::new(config, CampaignKind::Distance)?, jobs)
}
