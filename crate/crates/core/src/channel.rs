//! Seeded simulation of the display -> camera channel.
//!
//! Captures are a sample-and-hold resampling of the displayed sequence.
//! Each captured frame then goes through, in order: rolling-shutter row
//! mixing, optional tile occlusion, hand-motion jitter, ambient gain,
//! additive Gaussian sensor noise, and a random drop. Every captured frame
//! draws from its own ChaCha stream, so results do not depend on processing
//! order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::colorspace::LabFrame;
use crate::encoder::{EncodedSequence, PacketInfo, Role};
use crate::error::Error;
use crate::geometry::{warp_lab, Similarity};

/// Bounds of the per-frame hand-motion transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Maximum absolute translation per axis, pixels.
    pub translation_px: f64,
    /// Maximum absolute rotation, degrees.
    pub rotation_deg: f64,
    /// Maximum relative scale change (0.01 = 1 %).
    pub scale: f64,
}

impl Jitter {
    /// Uniform draw within the bounds, about the frame center.
    pub fn sample(&self, rng: &mut impl Rng, width: usize, height: usize) -> Similarity {
        let uniform = |rng: &mut dyn rand::RngCore, m: f64| {
            if m > 0.0 {
                rng.random_range(-m..=m)
            } else {
                0.0
            }
        };
        let tx = uniform(rng, self.translation_px);
        let ty = uniform(rng, self.translation_px);
        let rot = uniform(rng, self.rotation_deg).to_radians();
        let scale = 1.0 + uniform(rng, self.scale);
        Similarity::about(width as f64 / 2.0, height as f64 / 2.0, scale, rot, tx, ty)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub fps_rx: u32,
    /// Multiplicative lightness factor in `(0, 1]`.
    pub gain: f64,
    /// Standard deviation of additive noise, L* units.
    pub noise_sigma: f64,
    pub drop_prob: f64,
    pub jitter: Option<Jitter>,
    /// Fraction of rows, from the top, read from the previously displayed frame.
    pub shutter_band: f64,
    /// Probability that a code tile is covered in a captured frame.
    #[serde(default)]
    pub occlusion_prob: f64,
    pub seed: u64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self::ideal(60)
    }
}

/// Named channel presets. The `iso*-s*` names mirror camera (ISO, shutter)
/// settings; their gain and noise values are simulation analogues only.
pub const PRESETS: [&str; 5] = [
    "ideal",
    "iso50-s90",
    "iso100-s180",
    "iso200-s360",
    "iso400-s60",
];

impl ChannelParams {
    pub fn ideal(fps_rx: u32) -> Self {
        Self {
            fps_rx,
            gain: 1.0,
            noise_sigma: 0.0,
            drop_prob: 0.0,
            jitter: None,
            shutter_band: 0.0,
            occlusion_prob: 0.0,
            seed: 0,
        }
    }

    pub fn preset(name: &str, fps_rx: u32) -> Option<Self> {
        let base = Self::ideal(fps_rx);
        let p = match name {
            "ideal" => base,
            "iso50-s90" => Self {
                gain: 0.85,
                noise_sigma: 0.4,
                ..base
            },
            "iso100-s180" => Self {
                gain: 0.8,
                noise_sigma: 0.7,
                ..base
            },
            "iso200-s360" => Self {
                gain: 0.7,
                noise_sigma: 1.1,
                ..base
            },
            "iso400-s60" => Self {
                gain: 0.9,
                noise_sigma: 1.5,
                shutter_band: 0.1,
                ..base
            },
            _ => return None,
        };
        Some(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.fps_rx == 0 {
            return Err(Error::InvalidParam("fps_rx must be positive"));
        }
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(Error::InvalidParam("gain must lie in (0, 1]"));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParam("noise_sigma must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::InvalidParam("drop_prob must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.shutter_band) {
            return Err(Error::InvalidParam("shutter_band must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.occlusion_prob) {
            return Err(Error::InvalidParam("occlusion_prob must lie in [0, 1]"));
        }
        if let Some(j) = &self.jitter {
            if !(j.translation_px >= 0.0
                && j.rotation_deg >= 0.0
                && j.scale >= 0.0
                && j.scale < 1.0)
            {
                return Err(Error::InvalidParam(
                    "jitter bounds must be non-negative, scale below 1",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedFrame {
    pub timestamp_ms: f64,
    /// Index of the displayed frame that was sampled.
    pub source: usize,
    /// Packet shown by the sampled frame.
    pub packet: usize,
    pub role: Role,
    /// `None` when the frame was dropped.
    pub lab: Option<LabFrame>,
    /// Hand-motion transform applied to this capture.
    pub motion: Similarity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapturedSequence {
    pub frames: Vec<CapturedFrame>,
    pub fps_rx: u32,
    pub fps_tx: u32,
    pub packets: Vec<PacketInfo>,
    pub params: ChannelParams,
}

impl CapturedSequence {
    pub fn frame_period_ms(&self) -> f64 {
        1000.0 / self.fps_rx as f64
    }

    /// Marks capture `index` as lost.
    pub fn drop_frame(&mut self, index: usize) {
        if let Some(f) = self.frames.get_mut(index) {
            f.lab = None;
        }
    }

    pub fn delivered(&self) -> usize {
        self.frames.iter().filter(|f| f.lab.is_some()).count()
    }
}

/// Displayed-frame index sampled by each capture (sample and hold).
pub fn resample_schedule(displayed: usize, fps_tx: u32, fps_rx: u32) -> Vec<usize> {
    let captures = displayed as u64 * fps_rx as u64 / fps_tx as u64;
    (0..captures)
        .map(|j| (j * fps_tx as u64 / fps_rx as u64) as usize)
        .collect()
}

/// Top `floor(rho * height)` rows from `prev`, the rest from `curr`.
pub fn apply_rolling_shutter(curr: &LabFrame, prev: &LabFrame, rho: f64) -> LabFrame {
    let rows = ((rho.clamp(0.0, 1.0) * curr.height as f64).floor() as usize).min(curr.height);
    if rows == 0 {
        return curr.clone();
    }
    let split = rows * curr.width;
    let mut out = curr.clone();
    out.l[..split].copy_from_slice(&prev.l[..split]);
    out.a[..split].copy_from_slice(&prev.a[..split]);
    out.b[..split].copy_from_slice(&prev.b[..split]);
    out
}

pub fn apply_motion_jitter(frame: &LabFrame, t: &Similarity) -> LabFrame {
    warp_lab(frame, t)
}

fn frame_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Lightness a covered tile reads as.
const OCCLUDER_L: f64 = 50.0;

pub fn capture(enc: &EncodedSequence, cp: &ChannelParams) -> Result<CapturedSequence, Error> {
    cp.validate()?;
    if cp.fps_rx < enc.fps_tx {
        return Err(Error::FpsViolation {
            fps_tx: enc.fps_tx,
            fps_rx: cp.fps_rx,
        });
    }
    let schedule = resample_schedule(enc.frames.len(), enc.fps_tx, cp.fps_rx);
    let noise = Normal::new(0.0, cp.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let period = 1000.0 / cp.fps_rx as f64;

    let frames = schedule
        .iter()
        .enumerate()
        .map(|(j, &src)| {
            let mut rng = frame_rng(cp.seed, j);
            let shown = &enc.frames[src];
            let mut lab = if cp.shutter_band > 0.0 {
                let prev = &enc.frames[src.saturating_sub(1)].lab;
                apply_rolling_shutter(&shown.lab, prev, cp.shutter_band)
            } else {
                shown.lab.clone()
            };

            if cp.occlusion_prob > 0.0 {
                for tile in &enc.packets[shown.packet].tiles {
                    if rng.random::<f64>() < cp.occlusion_prob {
                        for y in tile.y..tile.bottom().min(lab.height) {
                            let row = y * lab.width;
                            lab.l[row + tile.x..row + tile.right().min(lab.width)].fill(OCCLUDER_L);
                        }
                    }
                }
            }

            let motion = match &cp.jitter {
                Some(j) => j.sample(&mut rng, lab.width, lab.height),
                None => Similarity::IDENTITY,
            };
            if !motion.is_identity() {
                lab = apply_motion_jitter(&lab, &motion);
            }

            if cp.gain != 1.0 || cp.noise_sigma > 0.0 {
                for v in lab.l.iter_mut() {
                    let mut x = *v * cp.gain;
                    if cp.noise_sigma > 0.0 {
                        x += noise.sample(&mut rng);
                    }
                    *v = x.clamp(0.0, 100.0);
                }
            }

            let dropped = cp.drop_prob > 0.0 && rng.random::<f64>() < cp.drop_prob;
            CapturedFrame {
                timestamp_ms: j as f64 * period,
                source: src,
                packet: shown.packet,
                role: shown.role,
                lab: (!dropped).then_some(lab),
                motion,
            }
        })
        .collect();

    Ok(CapturedSequence {
        frames,
        fps_rx: cp.fps_rx,
        fps_tx: enc.fps_tx,
        packets: enc.packets.clone(),
        params: cp.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barcode::Payload;
    use crate::encoder::{encode_lab_video, ModulationParams};
    use crate::fixtures::textured_lab;

    fn sequence(n: usize) -> EncodedSequence {
        let src = textured_lab(160, 160, 2);
        let frames = vec![src; n];
        let payloads: Vec<Payload> = (0..n as u64).map(|f| Payload::new(4, f)).collect();
        encode_lab_video(&frames, &payloads, &ModulationParams::default()).unwrap()
    }

    #[test]
    fn ideal_channel_is_identity() {
        let enc = sequence(3);
        let cap = capture(&enc, &ChannelParams::ideal(60)).unwrap();
        assert_eq!(cap.frames.len(), enc.frames.len());
        for (c, e) in cap.frames.iter().zip(&enc.frames) {
            assert_eq!(c.lab.as_ref(), Some(&e.lab));
        }
        let period = 1000.0 / 60.0;
        for (j, c) in cap.frames.iter().enumerate() {
            assert_eq!(c.timestamp_ms, j as f64 * period);
        }
    }

    #[test]
    fn seeded_runs_are_identical() {
        let enc = sequence(2);
        let cp = ChannelParams {
            noise_sigma: 1.0,
            gain: 0.8,
            drop_prob: 0.2,
            jitter: Some(Jitter {
                translation_px: 2.0,
                rotation_deg: 0.3,
                scale: 0.01,
            }),
            shutter_band: 0.2,
            occlusion_prob: 0.3,
            seed: 99,
            ..ChannelParams::ideal(60)
        };
        let a = capture(&enc, &cp).unwrap();
        let b = capture(&enc, &cp).unwrap();
        assert_eq!(a, b);
        let c = capture(&enc, &ChannelParams { seed: 100, ..cp }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gain_halves_the_difference() {
        let enc = sequence(1);
        let full = capture(&enc, &ChannelParams::ideal(60)).unwrap();
        let half = capture(
            &enc,
            &ChannelParams {
                gain: 0.5,
                ..ChannelParams::ideal(60)
            },
        )
        .unwrap();
        let diff = |c: &CapturedSequence| -> Vec<f64> {
            let (p, m) = (
                c.frames[0].lab.as_ref().unwrap(),
                c.frames[1].lab.as_ref().unwrap(),
            );
            p.l.iter().zip(&m.l).map(|(a, b)| a - b).collect()
        };
        for (f, h) in diff(&full).iter().zip(diff(&half)) {
            assert!((h - 0.5 * f).abs() < 1e-9);
        }
    }

    #[test]
    fn double_rate_duplicates_every_frame() {
        let enc = sequence(2);
        let cap = capture(&enc, &ChannelParams::ideal(120)).unwrap();
        assert_eq!(cap.frames.len(), 8);
        for pair in cap.frames.chunks(2) {
            assert_eq!(pair[0].source, pair[1].source);
            assert_eq!(pair[0].lab, pair[1].lab);
        }
        assert_eq!(resample_schedule(4, 60, 90), vec![0, 0, 1, 2, 2, 3]);
    }

    #[test]
    fn rejects_slow_camera() {
        let enc = sequence(1);
        assert_eq!(
            capture(&enc, &ChannelParams::ideal(30)),
            Err(Error::FpsViolation {
                fps_tx: 60,
                fps_rx: 30
            })
        );
    }

    #[test]
    fn rolling_shutter_rows() {
        let a = LabFrame::uniform(4, 10, 20.0);
        let b = LabFrame::uniform(4, 10, 80.0);
        assert_eq!(apply_rolling_shutter(&a, &b, 0.0), a);
        let half = apply_rolling_shutter(&a, &b, 0.5);
        for y in 0..10 {
            let want = if y < 5 { 80.0 } else { 20.0 };
            assert!(half.l[y * 4..(y + 1) * 4].iter().all(|&v| v == want));
        }
        let most = apply_rolling_shutter(&a, &b, 0.99);
        assert_eq!(most.l.iter().filter(|&&v| v == 80.0).count(), 36);
    }

    #[test]
    fn jitter_identity_and_integer_shifts() {
        let f = textured_lab(64, 48, 8);
        assert_eq!(apply_motion_jitter(&f, &Similarity::IDENTITY), f);
        let flat = LabFrame::uniform(20, 20, 33.0);
        assert_eq!(
            apply_motion_jitter(&flat, &Similarity::translation(2.0, -3.0)),
            flat
        );

        let there = apply_motion_jitter(&f, &Similarity::translation(3.0, 0.0));
        let back = apply_motion_jitter(&there, &Similarity::translation(-3.0, 0.0));
        for y in 0..48 {
            for x in 3..61 {
                assert_eq!(back.l[y * 64 + x], f.l[y * 64 + x]);
            }
        }
        // sub-pixel round trip is within interpolation error on a smooth image
        let there = apply_motion_jitter(&f, &Similarity::translation(1.5, 0.0));
        let back = apply_motion_jitter(&there, &Similarity::translation(-1.5, 0.0));
        let mut worst = 0.0f64;
        for y in 4..44 {
            for x in 4..60 {
                worst = worst.max((back.l[y * 64 + x] - f.l[y * 64 + x]).abs());
            }
        }
        assert!(worst < 6.0, "{worst}");
    }

    #[test]
    fn drops_and_occlusion_follow_probability() {
        let enc = sequence(20);
        let cp = ChannelParams {
            drop_prob: 0.25,
            seed: 5,
            ..ChannelParams::ideal(60)
        };
        let cap = capture(&enc, &cp).unwrap();
        let dropped = cap.frames.len() - cap.delivered();
        assert!(dropped > 2 && dropped < 20, "{dropped}");

        let cp = ChannelParams {
            occlusion_prob: 1.0,
            ..ChannelParams::ideal(60)
        };
        let cap = capture(&enc, &cp).unwrap();
        let tile = enc.packets[0].tiles[0];
        let lab = cap.frames[0].lab.as_ref().unwrap();
        assert_eq!(lab.l[tile.y * lab.width + tile.x], OCCLUDER_L);
    }

    #[test]
    fn presets_exist_and_validate() {
        for name in PRESETS {
            ChannelParams::preset(name, 60).unwrap().validate().unwrap();
        }
        assert!(ChannelParams::preset("iso9000", 60).is_none());
        assert!(ChannelParams {
            gain: 0.0,
            ..ChannelParams::ideal(60)
        }
        .validate()
        .is_err());
    }
}
