use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::campaign::{curve_key, CampaignResult};
use super::chain::BerRecord;
use crate::error::{Error, Result};

pub const BER_HEADER: [&str; 16] = [
    "scheme",
    "dpd_calib_temp_c",
    "eq",
    "m",
    "temp_c",
    "snr_db",
    "distance_m",
    "bits_sent",
    "bit_errors",
    "ber",
    "ber_lo95",
    "ber_hi95",
    "censored",
    "seed",
    "stream",
    "campaign",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ok,
    NoData,
}

#[derive(Debug, Serialize)]
struct ManifestFile {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    campaign: String,
    status: String,
    seed: u64,
    config_sha256: String,
    version: String,
    points: usize,
    censored_points: usize,
    files: Vec<ManifestFile>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes BER records as CSV.
pub fn write_ber_csv<W: std::io::Write>(campaign: &str, records: &[BerRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e| Error::csv("<ber records>", e);
    w.write_record(BER_HEADER).map_err(wrap)?;
    for r in records {
        let (lo, hi) = r.wilson();
        w.write_record([
            r.scheme.label().to_string(),
            opt(r.dpd_calib_temp_c),
            r.equalization.label().to_string(),
            r.mod_order.to_string(),
            r.temp_c.to_string(),
            format!("{:.4}", r.snr_db),
            opt(r.distance_m),
            r.bits_sent.to_string(),
            r.bit_errors.to_string(),
            format!("{:e}", r.ber()),
            format!("{lo:e}"),
            format!("{hi:e}"),
            r.censored.to_string(),
            r.seed.to_string(),
            r.stream.to_string(),
            campaign.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io("<ber records>", e))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<ManifestFile>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    files.push(ManifestFile {
        name: name.to_string(),
        sha256: hex::encode(Sha256::digest(bytes)),
    });
    Ok(())
}

/// Writes per-order BER tables, spectra and constellations of the last
/// point of every curve, the effective config and `manifest.toml`.
pub fn emit_artifacts(result: &CampaignResult, out_dir: &Path) -> Result<(RunStatus, PathBuf)> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let campaign = result.kind.name();
    let mut files = Vec::new();
    let records = result.records();

    let mut by_order: BTreeMap<usize, Vec<BerRecord>> = BTreeMap::new();
    for r in &records {
        by_order.entry(r.mod_order).or_default().push(r.clone());
    }
    for (m, recs) in &by_order {
        let mut buf = Vec::new();
        write_ber_csv(campaign, recs, &mut buf)?;
        write_file(out_dir, &format!("ber_{campaign}_m{m}.csv"), &buf, &mut files)?;
    }

    // Last axis point of each curve, keyed in plan order.
    let mut last: BTreeMap<String, usize> = BTreeMap::new();
    for (i, p) in result.points.iter().enumerate() {
        last.insert(curve_key(p), i);
    }
    let out_cfg = &result.config.output;
    for (key, &i) in &last {
        let o = &result.outcomes[i];
        let case = format!("{campaign}_{key}");
        if out_cfg.spectra {
            let mut w = csv::Writer::from_writer(Vec::new());
            let wrap = |e| Error::csv("<spectrum>", e);
            w.write_record(["bin", "freq_hz", "gain_re", "gain_im", "channel_db", "received_db"])
                .map_err(wrap)?;
            let ofdm = result.config.ofdm_config(o.record.mod_order, 0);
            for (k, (g, h)) in o.gains.as_slice().iter().zip(&o.channel).enumerate().take(ofdm.n_fft / 2 + 1) {
                let db = |x: f64| if x > 0.0 { format!("{:.6}", 10.0 * x.log10()) } else { String::new() };
                w.write_record([
                    k.to_string(),
                    ofdm.bin_frequency(k).to_string(),
                    format!("{:e}", g.re),
                    format!("{:e}", g.im),
                    db(h.norm_sqr()),
                    db((g * h).norm_sqr()),
                ])
                .map_err(wrap)?;
            }
            let buf = w.into_inner().map_err(|e| Error::io("<spectrum>", e.into_error()))?;
            write_file(out_dir, &format!("spectrum_{case}.csv"), &buf, &mut files)?;
        }
        if out_cfg.constellations && !o.constellation.is_empty() {
            let mut w = csv::Writer::from_writer(Vec::new());
            let wrap = |e| Error::csv("<constellation>", e);
            w.write_record(["subcarrier", "re", "im"]).map_err(wrap)?;
            let first = result.config.ofdm_config(o.record.mod_order, 0).n_fft / 2 - o.constellation.len();
            for (j, s) in o.constellation.iter().enumerate() {
                w.write_record([(first + j).to_string(), format!("{:e}", s.re), format!("{:e}", s.im)])
                    .map_err(wrap)?;
            }
            let buf = w.into_inner().map_err(|e| Error::io("<constellation>", e.into_error()))?;
            write_file(out_dir, &format!("constellation_{case}.csv"), &buf, &mut files)?;
        }
    }

    let status = if records.is_empty() { RunStatus::NoData } else { RunStatus::Ok };
    if !records.is_empty() {
        let text = result.config.to_toml_string()?;
        write_file(out_dir, "config.toml", text.as_bytes(), &mut files)?;
    }
    files.sort_by(|a, b| a.name.cmp(&b.name));
    let manifest = Manifest {
        campaign: campaign.to_string(),
        status: match status {
            RunStatus::Ok => "ok".into(),
            RunStatus::NoData => "no data".into(),
        },
        seed: result.config.seed,
        config_sha256: result.config.hash()?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        points: records.len(),
        censored_points: records.iter().filter(|r| r.censored).count(),
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse {
        what: "manifest",
        detail: e.to_string(),
    })?;
    let path = out_dir.join("manifest.toml");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok((status, path))
}
