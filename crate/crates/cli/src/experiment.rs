//! Seeded evaluation runs: condition grids, per-trial simulation and the
//! CSV/CDF reports.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ambilink_core::barcode::{EcLevel, Payload, TileLayout};
use ambilink_core::channel::capture;
use ambilink_core::colorspace::PerceptionParams;
use ambilink_core::decoder::{response_time_cdf, stream_decode, LinkMetrics, PacketResult};
use ambilink_core::encoder::{encode_still, Mode, ModulationParams};
use ambilink_core::fixtures::textured_lab;
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{channel_params, ExperimentSpec};

pub const CSV_HEADER: &str =
    "condition_id,trial,delta_e00,tiles,ec_level,mode,gaussian,motion_comp,channel_preset,psr,rt_p50_ms,rt_p95_ms";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub delta_e00: f64,
    pub tiles: usize,
    pub ec_level: EcLevel,
    pub mode: Mode,
    pub gaussian: bool,
    pub motion_comp: bool,
    pub channel_preset: String,
}

impl Condition {
    pub fn modulation(&self, spec: &ExperimentSpec) -> Result<ModulationParams> {
        let mp = ModulationParams {
            perception: PerceptionParams::new(self.delta_e00, spec.k_l)?,
            texture: spec.texture,
            layout: TileLayout {
                count: self.tiles,
                module_px: spec.module_px,
                quiet_zone: spec.quiet_zone,
            },
            ec: self.ec_level,
            smoothing_sigma: if self.gaussian {
                spec.smoothing_sigma
            } else {
                0.0
            },
            mode: self.mode,
            fps_tx: spec.fps_tx,
        };
        mp.validate()?;
        Ok(mp)
    }
}

/// Cartesian product of the grid, delta_e00 varying slowest.
pub fn conditions(spec: &ExperimentSpec) -> Vec<Condition> {
    let g = &spec.grid;
    let mut out = Vec::new();
    for &delta_e00 in &g.delta_e00 {
        for &tiles in &g.tiles {
            for &ec_level in &g.ec_level {
                for &mode in &g.mode {
                    for &gaussian in &g.gaussian {
                        for &motion_comp in &g.motion_comp {
                            for preset in &g.channel_preset {
                                out.push(Condition {
                                    delta_e00,
                                    tiles,
                                    ec_level,
                                    mode,
                                    gaussian,
                                    motion_comp,
                                    channel_preset: preset.clone(),
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `trial`. It does not depend on the condition, so every
/// condition of a grid sees the same sources and channel draws.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    splitmix64(splitmix64(base) ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub metrics: LinkMetrics,
    pub results: Vec<PacketResult>,
}

/// Encodes `spec.packets` codes onto a seeded textured still, passes them
/// through the condition's channel and decodes the capture.
pub fn run_trial(spec: &ExperimentSpec, cond: &Condition, seed: u64) -> Result<TrialOutcome> {
    let mp = cond.modulation(spec)?;
    let source = textured_lab(spec.width, spec.height, seed);
    let payloads: Vec<Payload> = (0..spec.packets as u64)
        .map(|f| Payload::new(spec.song_id, f))
        .collect();
    let enc = encode_still(&source, &payloads, &mp)?;
    let cp = channel_params(
        &cond.channel_preset,
        spec.fps_rx,
        &spec.channel,
        splitmix64(seed),
    )?;
    let cap = capture(&enc, &cp)?;
    drop(enc);
    let cfg = spec
        .decoder
        .config(cond.mode, mp.smoothing_sigma, cond.motion_comp)?;
    let (results, metrics) = stream_decode(&cap, &cfg);
    Ok(TrialOutcome { metrics, results })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub condition_id: String,
    pub trial: usize,
    pub condition: Condition,
    pub psr: f64,
    pub rt_p50_ms: Option<f64>,
    pub rt_p95_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub conditions: Vec<(String, Condition)>,
    pub rows: Vec<Row>,
    /// Pooled response-time samples per condition.
    pub samples: Vec<Vec<f64>>,
}

pub fn condition_id(index: usize) -> String {
    format!("c{index:03}")
}

pub fn evaluate(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let conds = conditions(spec);
    let jobs: Vec<(usize, usize)> = (0..conds.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(c, t)| {
            run_trial(spec, &conds[c], trial_seed(spec.seed, t))
                .with_context(|| format!("condition {} trial {t}", condition_id(c)))
        })
        .collect::<Result<_>>()?;

    let mut samples = vec![Vec::new(); conds.len()];
    let rows = jobs
        .iter()
        .zip(&outcomes)
        .map(|(&(c, t), o)| {
            samples[c].extend_from_slice(&o.metrics.response_time_samples);
            Row {
                condition_id: condition_id(c),
                trial: t,
                condition: conds[c].clone(),
                psr: o.metrics.psr,
                rt_p50_ms: o.metrics.response_percentile(0.5),
                rt_p95_ms: o.metrics.response_percentile(0.95),
            }
        })
        .collect();
    Ok(Report {
        conditions: conds
            .into_iter()
            .enumerate()
            .map(|(i, c)| (condition_id(i), c))
            .collect(),
        rows,
        samples,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.3}")).unwrap_or_default()
}

impl Report {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let c = &r.condition;
            let _ = writeln!(
                out,
                "{},{},{:.2},{},{},{},{},{},{},{:.6},{},{}",
                r.condition_id,
                r.trial,
                c.delta_e00,
                c.tiles,
                c.ec_level.name(),
                c.mode.name(),
                c.gaussian,
                c.motion_comp,
                c.channel_preset,
                r.psr,
                opt(r.rt_p50_ms),
                opt(r.rt_p95_ms),
            );
        }
        out
    }

    pub fn cdf_csv(&self, condition: usize) -> String {
        let mut out = String::from("response_ms,fraction\n");
        for (ms, frac) in response_time_cdf(&self.samples[condition]) {
            let _ = writeln!(out, "{ms:.3},{frac:.6}");
        }
        out
    }

    /// Mean PSR over the trials of each condition.
    pub fn mean_psr(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.conditions.len()];
        let mut n = vec![0usize; self.conditions.len()];
        for r in &self.rows {
            let i = self
                .conditions
                .iter()
                .position(|(id, _)| *id == r.condition_id)
                .expect("known condition");
            sum[i] += r.psr;
            n[i] += 1;
        }
        sum.iter()
            .zip(&n)
            .map(|(s, &k)| s / k.max(1) as f64)
            .collect()
    }

    /// Writes `results.csv`, `conditions.json` and `cdf/<condition_id>.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let cdf_dir = dir.join("cdf");
        fs::create_dir_all(&cdf_dir).with_context(|| format!("creating {}", cdf_dir.display()))?;
        fs::write(dir.join("results.csv"), self.csv())?;
        let conds: Vec<serde_json::Value> = self
            .conditions
            .iter()
            .map(|(id, c)| serde_json::json!({ "condition_id": id, "condition": c }))
            .collect();
        fs::write(
            dir.join("conditions.json"),
            serde_json::to_string_pretty(&conds)? + "\n",
        )?;
        for (i, (id, _)) in self.conditions.iter().enumerate() {
            fs::write(cdf_dir.join(format!("{id}.csv")), self.cdf_csv(i))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            packets: 4,
            trials: 2,
            width: 140,
            height: 140,
            ..ExperimentSpec::default()
        }
    }

    #[test]
    fn grid_product_size() {
        let mut s = small_spec();
        s.grid.delta_e00 = (0..11).map(|i| 1.0 + 0.2 * i as f64).collect();
        s.grid.gaussian = vec![false, true];
        assert_eq!(conditions(&s).len(), 22);
    }

    #[test]
    fn seeds_differ_per_trial_only() {
        assert_ne!(trial_seed(1, 0), trial_seed(1, 1));
        assert_eq!(trial_seed(1, 3), trial_seed(1, 3));
    }

    #[test]
    fn ideal_evaluation_is_deterministic() {
        let s = small_spec();
        let a = evaluate(&s).unwrap();
        assert!(a.rows.iter().all(|r| r.psr == 1.0));
        let csv = a.csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(evaluate(&s).unwrap().csv(), csv);
        assert!(a.cdf_csv(0).ends_with(",1.000000\n"));
    }
}
