//! The subcommands, as library functions over paths and configs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ambilink_core::barcode::Payload;
use ambilink_core::channel::{capture, ChannelParams};
use ambilink_core::colorspace::{lab_to_srgb, srgb_to_lab, LabFrame};
use ambilink_core::decoder::{
    compute_metrics, decode_delivered, pair_stride, Delivered, GroundTruth, LinkMetrics,
    PacketResult,
};
use ambilink_core::encoder::{
    encode_lab_video, encode_still, EncodedFrame, EncodedSequence, Mode, ModulationParams,
    PacketInfo,
};
use ambilink_core::fixtures::textured_lab;
use ambilink_core::sync::{playback_position, Track, TrackRegistry};
use anyhow::{bail, ensure, Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::config::{ExperimentSpec, RunConfig};
use crate::experiment::evaluate;
use crate::store::FrameStore;

pub const TRANSMIT_SIDECAR: &str = "truth.json";
pub const CAPTURE_SIDECAR: &str = "capture.json";

/// Written next to an encoded store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitSidecar {
    pub fps_tx: u32,
    pub mode: Mode,
    pub modulation: ModulationParams,
    /// One entry per code frame; `first_frame` indexes the store.
    pub packets: Vec<PacketInfo>,
}

/// Written next to a captured store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSidecar {
    pub fps_tx: u32,
    pub fps_rx: u32,
    pub mode: Mode,
    pub smoothing_sigma: f64,
    pub channel: ChannelParams,
    pub truth: GroundTruth,
}

/// Decoded packet as stored on disk; wall-clock timing lives in a separate
/// file so that this one is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedRecord {
    pub payload: Payload,
    pub capture_ts_ms: f64,
    pub completed_ts_ms: f64,
    pub frames: [usize; 2],
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn store_labs(store: &FrameStore) -> Result<Vec<LabFrame>> {
    store
        .frames
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.as_ref()
                .map(srgb_to_lab)
                .with_context(|| format!("frame {i} is missing"))
        })
        .collect()
}

fn store_from_labs(
    fps: u32,
    frames: impl IntoIterator<Item = Option<LabFrame>>,
) -> Result<FrameStore> {
    FrameStore::new(
        fps,
        frames
            .into_iter()
            .map(|f| f.as_ref().map(lab_to_srgb))
            .collect(),
    )
}

/// Hides one code per input frame; writes the modulated store and its
/// ground-truth sidecar to `out`.
pub fn encode(input: &Path, out: &Path, cfg: &RunConfig) -> Result<TransmitSidecar> {
    let mp = cfg.modulation.params()?;
    let store = FrameStore::read(input)?;
    let labs = store_labs(&store)?;
    let payloads: Vec<Payload> = (0..labs.len() as u64)
        .map(|i| Payload::new(cfg.payload.song_id, cfg.payload.first_frame + i))
        .collect();
    let enc = encode_lab_video(&labs, &payloads, &mp)?;
    store_from_labs(mp.fps_tx, enc.frames.into_iter().map(|f| Some(f.lab)))?.write(out)?;
    let sidecar = TransmitSidecar {
        fps_tx: mp.fps_tx,
        mode: mp.mode,
        modulation: mp,
        packets: enc.packets,
    };
    write_json(&out.join(TRANSMIT_SIDECAR), &sidecar)?;
    Ok(sidecar)
}

fn load_encoded(input: &Path) -> Result<(EncodedSequence, TransmitSidecar)> {
    let store = FrameStore::read(input)?;
    let sidecar: TransmitSidecar = read_json(&input.join(TRANSMIT_SIDECAR))?;
    let labs = store_labs(&store)?;
    let pattern = sidecar.mode.pattern();
    let mut frames = Vec::with_capacity(labs.len());
    let mut labs = labs.into_iter();
    for (i, p) in sidecar.packets.iter().enumerate() {
        ensure!(
            p.first_frame == frames.len(),
            "packet {i} does not start at frame {}",
            frames.len()
        );
        for &role in pattern {
            let lab = labs
                .next()
                .with_context(|| format!("store ends inside packet {i}"))?;
            frames.push(EncodedFrame {
                lab,
                role,
                packet: i,
            });
        }
    }
    ensure!(
        labs.next().is_none(),
        "store holds frames beyond the last packet"
    );
    let enc = EncodedSequence {
        frames,
        packets: sidecar.packets.clone(),
        fps_tx: sidecar.fps_tx,
        mode: sidecar.mode,
    };
    Ok((enc, sidecar))
}

/// Films an encoded store through the configured channel.
pub fn simulate(input: &Path, out: &Path, cfg: &RunConfig, seed: u64) -> Result<CaptureSidecar> {
    let (enc, tx) = load_encoded(input)?;
    let cp = cfg.channel.params(seed)?;
    let cap = capture(&enc, &cp)?;
    drop(enc);
    let sidecar = CaptureSidecar {
        fps_tx: cap.fps_tx,
        fps_rx: cap.fps_rx,
        mode: tx.mode,
        smoothing_sigma: tx.modulation.smoothing_sigma,
        channel: cp,
        truth: GroundTruth::from_capture(&cap),
    };
    store_from_labs(cap.fps_rx, cap.frames.into_iter().map(|f| f.lab))?.write(out)?;
    write_json(&out.join(CAPTURE_SIDECAR), &sidecar)?;
    Ok(sidecar)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeReport {
    pub results: Vec<PacketResult>,
    pub metrics: Option<LinkMetrics>,
    pub attempts: usize,
}

/// Decodes a captured store. Scores against the capture sidecar when one is
/// present; otherwise the transmit rate and mode come from `cfg`.
pub fn decode(input: &Path, out: &Path, cfg: &RunConfig) -> Result<DecodeReport> {
    let store = FrameStore::read(input)?;
    let sidecar_path = input.join(CAPTURE_SIDECAR);
    let sidecar: Option<CaptureSidecar> = sidecar_path
        .exists()
        .then(|| read_json(&sidecar_path))
        .transpose()?;
    let (fps_tx, mode, sigma) = match &sidecar {
        Some(s) => (s.fps_tx, s.mode, s.smoothing_sigma),
        None => (
            cfg.modulation.fps_tx,
            cfg.modulation.mode,
            cfg.modulation.smoothing_sigma,
        ),
    };
    let fps_rx = store.manifest.fps;
    ensure!(
        fps_rx >= fps_tx,
        "capture rate {fps_rx} is below the transmit rate {fps_tx}"
    );
    let dcfg = cfg.decoder.config(mode, sigma, cfg.decoder.motion_comp)?;

    let labs: Vec<(usize, LabFrame)> = store.present().map(|(i, f)| (i, srgb_to_lab(f))).collect();
    let period = 1000.0 / fps_rx as f64;
    let delivered: Vec<Delivered> = labs
        .iter()
        .map(|(i, lab)| Delivered {
            index: *i,
            timestamp_ms: *i as f64 * period,
            lab,
        })
        .collect();
    let outcome = decode_delivered(&delivered, pair_stride(mode, fps_tx, fps_rx), &dcfg);

    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let records: Vec<DecodedRecord> = outcome
        .results
        .iter()
        .map(|r| DecodedRecord {
            payload: r.payload,
            capture_ts_ms: r.capture_ts_ms,
            completed_ts_ms: r.completed_ts_ms,
            frames: r.frames,
        })
        .collect();
    write_json(&out.join("results.json"), &records)?;
    let latencies: Vec<f64> = outcome.results.iter().map(|r| r.latency_ms).collect();
    write_json(
        &out.join("timing.json"),
        &serde_json::json!({ "latency_ms": latencies }),
    )?;

    let metrics = sidecar.map(|s| {
        let mut m = compute_metrics(&outcome.results, &s.truth);
        m.attempts = outcome.attempts;
        m.fallbacks = outcome.fallbacks;
        m
    });
    if let Some(m) = &metrics {
        let stable = LinkMetrics {
            latency_samples: Vec::new(),
            ..m.clone()
        };
        write_json(&out.join("metrics.json"), &stable)?;
    }
    Ok(DecodeReport {
        results: outcome.results,
        metrics,
        attempts: outcome.attempts,
    })
}

pub fn evaluate_cmd(spec: &ExperimentSpec, out: &Path) -> Result<crate::experiment::Report> {
    let report = evaluate(spec)?;
    report.write(out)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoPosition {
    pub song_id: u64,
    pub frame_num: u64,
    pub capture_ts_ms: f64,
    pub now_ms: f64,
    pub position_ms: f64,
}

/// Streams a synthetic clip for the configured song through the channel and
/// reports the playback position implied by each decoded packet at the
/// moment its pair completed. Writes `positions.csv` to `out`.
pub fn sync_demo(out: &Path, cfg: &RunConfig, seed: u64) -> Result<Vec<DemoPosition>> {
    let mp = cfg.modulation.params()?;
    let song_id = cfg.payload.song_id;
    let registry = if cfg.track.is_empty() {
        let packets = cfg.demo.packets as u64 + cfg.payload.first_frame;
        TrackRegistry::new([Track {
            id: song_id,
            title: format!("track {song_id}"),
            duration_ms: (2000 * (packets + 1)).div_ceil(mp.fps_tx as u64),
            fps_tx: mp.fps_tx,
        }])?
    } else {
        TrackRegistry::new(cfg.track.iter().cloned())?
    };
    let Some(track) = registry.get(song_id) else {
        bail!("song {song_id} is not in the registry");
    };
    ensure!(
        track.fps_tx == mp.fps_tx,
        "track {song_id} is registered at {} fps, modulation uses {}",
        track.fps_tx,
        mp.fps_tx
    );
    ensure!(cfg.demo.packets >= 1, "demo needs at least one packet");

    let source = textured_lab(cfg.demo.width, cfg.demo.height, seed);
    let payloads: Vec<Payload> = (0..cfg.demo.packets as u64)
        .map(|i| Payload::new(song_id, cfg.payload.first_frame + i))
        .collect();
    let enc = encode_still(&source, &payloads, &mp)?;
    let cap = capture(&enc, &cfg.channel.params(seed)?)?;
    let dcfg = cfg
        .decoder
        .config(mp.mode, mp.smoothing_sigma, cfg.decoder.motion_comp)?;
    let (results, _) = ambilink_core::decoder::stream_decode(&cap, &dcfg);

    let mut positions = Vec::new();
    for r in &results {
        let now_ms = r.completed_ts_ms;
        let p = playback_position(r, &registry, now_ms)?;
        positions.push(DemoPosition {
            song_id: p.song_id,
            frame_num: r.payload.frame_num,
            capture_ts_ms: r.capture_ts_ms,
            now_ms,
            position_ms: p.position_ms,
        });
    }
    let mut csv = String::from("song_id,frame_num,capture_ts_ms,now_ms,position_ms\n");
    for p in &positions {
        let _ = writeln!(
            csv,
            "{},{},{:.3},{:.3},{:.3}",
            p.song_id, p.frame_num, p.capture_ts_ms, p.now_ms, p.position_ms
        );
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("positions.csv"), csv)?;
    Ok(positions)
}
