//! Receiver pipeline.
//!
//! Consecutive captured frames are optionally motion-aligned and subtracted.
//! The complementary modulation cancels the video content and leaves a
//! signed image of the code; its region of interest is cropped, binarized by
//! sign and handed to the barcode reader. [`stream_decode`] runs this over a
//! capture with the parity synchronization that, once locked, only feeds
//! code-aligned frame pairs to the reader.

use std::collections::{HashMap, HashSet};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barcode::{decode_matrix, DecodeFailure, Payload, Rect};
use crate::channel::CapturedSequence;
use crate::colorspace::LabFrame;
use crate::encoder::{gaussian_blur, Mode};
use crate::error::Error;
use crate::geometry::{sample_bilinear, warp_lab, Similarity};
use crate::texture::{GrayImage, ScalarMap};

/// Signed per-pixel lightness difference of two frames.
pub type DiffFrame = ScalarMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Minimum absolute difference, in L*, for a pixel to count as modulated.
    pub roi_threshold: f64,
    /// Connected regions smaller than this are treated as noise.
    pub min_region_px: usize,
    /// Consecutive failures in the synced phase before falling back.
    pub resync_failures: u32,
    pub motion_comp: bool,
    /// Transmit pattern, which fixes the spacing of decodable pairs.
    pub mode: Mode,
    /// Transmit smoothing width. When the plain sign image does not decode,
    /// a one-step deconvolution `2d - G*d` of the difference is tried, which
    /// restores module corners rounded by the smoothing. `0` disables it.
    pub sharpen_sigma: f64,
    /// Width of a Gaussian low-pass applied to the difference before the
    /// sign threshold in an extra attempt; `0` disables it.
    pub denoise_sigma: f64,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            roi_threshold: 1.0,
            min_region_px: 64,
            resync_failures: 5,
            motion_comp: false,
            mode: Mode::Pair,
            sharpen_sigma: 1.0,
            denoise_sigma: 0.0,
        }
    }
}

impl DecoderConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.roi_threshold > 0.0) {
            return Err(Error::InvalidParam("roi_threshold must be positive"));
        }
        if self.resync_failures == 0 {
            return Err(Error::InvalidParam("resync_failures must be at least 1"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Motion compensation

const PATCH_HALF: usize = 5;
const SEARCH_PX: usize = 10;
const MAX_FEATURES: usize = 200;
const MIN_INLIERS: usize = 8;
const MIN_NCC: f64 = 0.8;
const RANSAC_ROUNDS: usize = 300;

/// Horizontal and vertical Sobel gradients.
fn gradients(l: &[f64], w: usize, h: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        l[y * w + x]
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x - 1, y)
                - at(x - 1, y + 1))
                / 8.0;
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1)
                - at(x - 1, y - 1)
                - 2.0 * at(x, y - 1)
                - at(x + 1, y - 1))
                / 8.0;
        }
    }
    (gx, gy)
}

/// Sum over a `(2r + 1)^2` box, zero outside the image.
fn box_sum(v: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &v[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = row[x.saturating_sub(r)..(x + r + 1).min(w)].iter().sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for yy in y.saturating_sub(r)..(y + r + 1).min(h) {
            for x in 0..w {
                out[y * w + x] += tmp[yy * w + x];
            }
        }
    }
    out
}

/// Harris corners at least `margin` pixels from the border, strongest first.
fn harris_corners(l: &[f64], w: usize, h: usize, margin: usize) -> Vec<(usize, usize)> {
    if w <= 2 * margin || h <= 2 * margin {
        return Vec::new();
    }
    let (gx, gy) = gradients(l, w, h);
    let sxx = box_sum(&gx.iter().map(|v| v * v).collect::<Vec<_>>(), w, h, 2);
    let syy = box_sum(&gy.iter().map(|v| v * v).collect::<Vec<_>>(), w, h, 2);
    let sxy = box_sum(
        &gx.iter().zip(&gy).map(|(a, b)| a * b).collect::<Vec<_>>(),
        w,
        h,
        2,
    );
    let response: Vec<f64> = (0..w * h)
        .map(|i| {
            let tr = sxx[i] + syy[i];
            sxx[i] * syy[i] - sxy[i] * sxy[i] - 0.04 * tr * tr
        })
        .collect();
    let peak = response.iter().copied().fold(0.0, f64::max);
    if peak <= 1e-9 {
        return Vec::new();
    }
    let floor = peak * 1e-3;
    let mut corners = Vec::new();
    for y in margin..h - margin {
        for x in margin..w - margin {
            let r = response[y * w + x];
            if r <= floor {
                continue;
            }
            let is_max = (y - 3..=y + 3).all(|yy| {
                (x - 3..=x + 3).all(|xx| {
                    let o = response[yy * w + xx];
                    o < r || (o == r && (yy, xx) >= (y, x))
                })
            });
            if is_max {
                corners.push((r, x, y));
            }
        }
    }
    corners.sort_by(|a, b| b.0.total_cmp(&a.0));
    corners
        .into_iter()
        .take(MAX_FEATURES)
        .map(|(_, x, y)| (x, y))
        .collect()
}

/// Zero-mean normalized cross-correlation of the patches centered at `(px, py)`
/// in `a` and `(qx, qy)` in `b`.
fn ncc(a: &[f64], b: &[f64], w: usize, (px, py): (usize, usize), (qx, qy): (usize, usize)) -> f64 {
    let r = PATCH_HALF;
    let n = ((2 * r + 1) * (2 * r + 1)) as f64;
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for dy in 0..2 * r + 1 {
        let ra = &a[(py + dy - r) * w + px - r..][..2 * r + 1];
        let rb = &b[(qy + dy - r) * w + qx - r..][..2 * r + 1];
        for (&u, &v) in ra.iter().zip(rb) {
            sa += u;
            sb += v;
            saa += u * u;
            sbb += v * v;
            sab += u * v;
        }
    }
    let cov = sab - sa * sb / n;
    let va = saa - sa * sa / n;
    let vb = sbb - sb * sb / n;
    if va <= 1e-9 || vb <= 1e-9 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Lucas-Kanade refinement of the displacement of the patch around `p`,
/// solving for translation and a brightness offset.
fn refine_klt(
    prev: &[f64],
    grad: (&[f64], &[f64]),
    curr: &[f64],
    (w, h): (usize, usize),
    p: (usize, usize),
    start: (f64, f64),
) -> Option<(f64, f64)> {
    let r = PATCH_HALF as isize;
    let (mut hxx, mut hxy, mut hyy) = (0.0, 0.0, 0.0);
    let mut cells = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for dy in -r..=r {
        for dx in -r..=r {
            let x = (p.0 as isize + dx) as usize;
            let y = (p.1 as isize + dy) as usize;
            let i = y * w + x;
            let (gx, gy) = (grad.0[i], grad.1[i]);
            hxx += gx * gx;
            hxy += gx * gy;
            hyy += gy * gy;
            cells.push((x as f64, y as f64, prev[i], gx, gy));
        }
    }
    let det = hxx * hyy - hxy * hxy;
    if det.abs() < 1e-9 {
        return None;
    }
    let n = cells.len() as f64;
    let (mut dx, mut dy) = start;
    for _ in 0..20 {
        let errors: Vec<f64> = cells
            .iter()
            .map(|&(x, y, t, _, _)| sample_bilinear(curr, w, h, x + dx, y + dy) - t)
            .collect();
        let bias = errors.iter().sum::<f64>() / n;
        let (mut bx, mut by) = (0.0, 0.0);
        for (&(_, _, _, gx, gy), e) in cells.iter().zip(&errors) {
            bx += gx * (e - bias);
            by += gy * (e - bias);
        }
        let sx = -(hyy * bx - hxy * by) / det;
        let sy = -(hxx * by - hxy * bx) / det;
        dx += sx;
        dy += sy;
        if (dx - start.0).abs() > 2.0 || (dy - start.1).abs() > 2.0 {
            return None;
        }
        if sx.hypot(sy) < 1e-3 {
            break;
        }
    }
    Some((dx, dy))
}

/// Least-squares similarity mapping `src[i]` onto `dst[i]`.
fn fit_similarity(pairs: &[((f64, f64), (f64, f64))]) -> Option<Similarity> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let (mut px, mut py, mut qx, mut qy) = (0.0, 0.0, 0.0, 0.0);
    for &((x, y), (u, v)) in pairs {
        px += x;
        py += y;
        qx += u;
        qy += v;
    }
    let (px, py, qx, qy) = (px / n, py / n, qx / n, qy / n);
    let (mut num_a, mut num_b, mut den) = (0.0, 0.0, 0.0);
    for &((x, y), (u, v)) in pairs {
        let (x, y, u, v) = (x - px, y - py, u - qx, v - qy);
        num_a += x * u + y * v;
        num_b += x * v - y * u;
        den += x * x + y * y;
    }
    if den < 1e-9 {
        return None;
    }
    let (a, b) = (num_a / den, num_b / den);
    Some(Similarity {
        a,
        b,
        tx: qx - (a * px - b * py),
        ty: qy - (b * px + a * py),
    })
}

fn inliers(t: &Similarity, pairs: &[((f64, f64), (f64, f64))], tol: f64) -> Vec<usize> {
    pairs
        .iter()
        .enumerate()
        .filter(|(_, &((x, y), (u, v)))| {
            let (mx, my) = t.map(x, y);
            (mx - u).hypot(my - v) < tol
        })
        .map(|(i, _)| i)
        .collect()
}

/// RANSAC over two-point similarity hypotheses, then iterative least-squares
/// refits on the inlier set.
fn robust_similarity(pairs: &[((f64, f64), (f64, f64))]) -> Option<Similarity> {
    if pairs.len() < MIN_INLIERS {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..RANSAC_ROUNDS {
        let i = rng.random_range(0..pairs.len());
        let j = rng.random_range(0..pairs.len());
        if i == j {
            continue;
        }
        let Some(t) = fit_similarity(&[pairs[i], pairs[j]]) else {
            continue;
        };
        if !(0.8..1.25).contains(&t.scale()) {
            continue;
        }
        let found = inliers(&t, pairs, 1.0);
        if found.len() > best.len() {
            best = found;
        }
    }
    if best.len() < MIN_INLIERS {
        return None;
    }
    let mut t = fit_similarity(&best.iter().map(|&i| pairs[i]).collect::<Vec<_>>())?;
    for tol in [1.0, 0.75, 0.5] {
        let set = inliers(&t, pairs, tol);
        if set.len() < MIN_INLIERS {
            break;
        }
        t = fit_similarity(&set.iter().map(|&i| pairs[i]).collect::<Vec<_>>())?;
    }
    Some(t)
}

/// The similarity `t` with `curr(t(p)) ~ prev(p)`, or `None` when too few
/// reliable feature matches are found.
pub fn estimate_motion(prev: &LabFrame, curr: &LabFrame) -> Option<Similarity> {
    let (w, h) = (prev.width, prev.height);
    let margin = PATCH_HALF + SEARCH_PX + 1;
    let corners = harris_corners(&prev.l, w, h, margin);
    if corners.len() < MIN_INLIERS {
        return None;
    }
    let (gx, gy) = gradients(&prev.l, w, h);
    let s = SEARCH_PX as isize;
    let mut pairs = Vec::with_capacity(corners.len());
    for &(x, y) in &corners {
        let mut best = (MIN_NCC, None);
        for dy in -s..=s {
            for dx in -s..=s {
                let q = ((x as isize + dx) as usize, (y as isize + dy) as usize);
                let score = ncc(&prev.l, &curr.l, w, (x, y), q);
                if score > best.0 {
                    best = (score, Some((dx as f64, dy as f64)));
                }
            }
        }
        let Some(start) = best.1 else { continue };
        if let Some((dx, dy)) = refine_klt(&prev.l, (&gx, &gy), &curr.l, (w, h), (x, y), start) {
            let p = (x as f64, y as f64);
            pairs.push((p, (p.0 + dx, p.1 + dy)));
        }
    }
    robust_similarity(&pairs)
}

/// Registers `curr` onto `prev`. Returns the estimated motion and `curr`
/// resampled into the coordinates of `prev`; the identity is used when no
/// reliable estimate exists.
///
/// # Panics
/// If the frames differ in size.
pub fn align_frames(prev: &LabFrame, curr: &LabFrame) -> (Similarity, LabFrame) {
    assert!(prev.same_size(curr), "frames must have equal size");
    let t = estimate_motion(prev, curr).unwrap_or(Similarity::IDENTITY);
    (t, warp_lab(curr, &t))
}

// ---------------------------------------------------------------------------
// Per-pair decoding

/// `L(a) - L(b)` per pixel.
///
/// # Panics
/// If the frames differ in size.
pub fn subtract(a: &LabFrame, b: &LabFrame) -> DiffFrame {
    assert!(a.same_size(b), "frames must have equal size");
    DiffFrame {
        width: a.width,
        height: a.height,
        data: a.l.iter().zip(&b.l).map(|(x, y)| x - y).collect(),
    }
}

/// Bounding box of the pixels with `|d| > roi_threshold`, counting only
/// 8-connected regions of at least `min_region_px` pixels.
pub fn detect_roi(d: &DiffFrame, cfg: &DecoderConfig) -> Option<Rect> {
    let (w, h) = (d.width, d.height);
    let mut mask: Vec<bool> = d.data.iter().map(|v| v.abs() > cfg.roi_threshold).collect();
    let mut bbox: Option<Rect> = None;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !mask[start] {
            continue;
        }
        mask[start] = false;
        stack.push(start);
        let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
        let mut size = 0usize;
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            size += 1;
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    let j = yy * w + xx;
                    if mask[j] {
                        mask[j] = false;
                        stack.push(j);
                    }
                }
            }
        }
        if size >= cfg.min_region_px {
            let r = Rect {
                x: x0,
                y: y0,
                w: x1 - x0 + 1,
                h: y1 - y0 + 1,
            };
            bbox = Some(bbox.map_or(r, |b| b.union(&r)));
        }
    }
    bbox
}

/// Crops `bbox` and thresholds by sign: the first image is light (100) where
/// the difference is positive, the second where it is negative. Zero reads
/// as dark in both.
pub fn binarize_roi(d: &DiffFrame, bbox: &Rect) -> [GrayImage; 2] {
    let x1 = bbox.right().min(d.width);
    let y1 = bbox.bottom().min(d.height);
    let (cw, ch) = (x1 - bbox.x, y1 - bbox.y);
    let mut pos = Vec::with_capacity(cw * ch);
    let mut neg = Vec::with_capacity(cw * ch);
    for y in bbox.y..y1 {
        for &v in &d.data[y * d.width + bbox.x..y * d.width + x1] {
            pos.push(if v > 0.0 { 100.0 } else { 0.0 });
            neg.push(if v < 0.0 { 100.0 } else { 0.0 });
        }
    }
    let image = |data| GrayImage {
        width: cw,
        height: ch,
        data,
    };
    [image(pos), image(neg)]
}

/// Subtracts, locates and reads one frame pair, trying both polarities.
pub fn decode_pair(
    prev: &LabFrame,
    curr: &LabFrame,
    cfg: &DecoderConfig,
) -> Result<Payload, DecodeFailure> {
    let aligned;
    let curr = if cfg.motion_comp {
        aligned = align_frames(prev, curr).1;
        &aligned
    } else {
        curr
    };
    let d = subtract(prev, curr);
    let roi = detect_roi(&d, cfg).ok_or(DecodeFailure::NoCode)?;
    let mut failure = DecodeFailure::NoCode;
    let mut attempt = |d: &DiffFrame| {
        for img in binarize_roi(d, &roi) {
            match decode_matrix(&img) {
                Ok(p) => return Some(p),
                Err(e) => failure = failure.max_severity(e),
            }
        }
        None
    };
    if let Some(p) = attempt(&d) {
        return Ok(p);
    }
    if cfg.sharpen_sigma > 0.0 {
        if let Some(p) = attempt(&sharpen(&d, cfg.sharpen_sigma)) {
            return Ok(p);
        }
    }
    if cfg.denoise_sigma > 0.0 {
        let smooth = DiffFrame {
            width: d.width,
            height: d.height,
            data: gaussian_blur(&d.data, d.width, d.height, cfg.denoise_sigma),
        };
        if let Some(p) = attempt(&smooth) {
            return Ok(p);
        }
        if cfg.sharpen_sigma > 0.0 {
            if let Some(p) = attempt(&sharpen(
                &smooth,
                cfg.sharpen_sigma.hypot(cfg.denoise_sigma),
            )) {
                return Ok(p);
            }
        }
    }
    Err(failure)
}

/// One Van Cittert step against a Gaussian blur: `2d - G*d`.
pub fn sharpen(d: &DiffFrame, sigma: f64) -> DiffFrame {
    let blurred = gaussian_blur(&d.data, d.width, d.height, sigma);
    DiffFrame {
        width: d.width,
        height: d.height,
        data: d
            .data
            .iter()
            .zip(&blurred)
            .map(|(v, b)| 2.0 * v - b)
            .collect(),
    }
}

impl DecodeFailure {
    /// The more informative of two failures: content beats checksum errors
    /// beats not finding a code.
    fn max_severity(self, other: DecodeFailure) -> DecodeFailure {
        let rank = |f: DecodeFailure| match f {
            DecodeFailure::NoCode => 0,
            DecodeFailure::Corrupt => 1,
            DecodeFailure::ForeignContent => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

// ---------------------------------------------------------------------------
// Synchronization

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Unsynced,
    /// Locked onto pairs whose index is congruent to `parity` modulo the stride.
    Synced {
        parity: usize,
    },
}

/// Parity lock over the sequence of delivered frame pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyncState {
    pub phase: Phase,
    pub consecutive_failures: u32,
    /// Number of times the lock was lost.
    pub fallbacks: u32,
    stride: Option<usize>,
    limit: u32,
}

impl SyncState {
    /// `stride` is the pair spacing between decodable pairs; `None` keeps
    /// attempting every pair.
    pub fn new(stride: Option<usize>, resync_failures: u32) -> Self {
        Self {
            phase: Phase::Unsynced,
            consecutive_failures: 0,
            fallbacks: 0,
            stride: stride.filter(|&s| s > 1),
            limit: resync_failures.max(1),
        }
    }

    pub fn should_attempt(&self, pair: usize) -> bool {
        match (self.phase, self.stride) {
            (Phase::Synced { parity }, Some(s)) => pair % s == parity,
            _ => true,
        }
    }

    pub fn record(&mut self, pair: usize, success: bool) {
        if success {
            self.consecutive_failures = 0;
            if let Some(s) = self.stride {
                self.phase = Phase::Synced { parity: pair % s };
            }
            return;
        }
        if let Phase::Synced { .. } = self.phase {
            self.consecutive_failures += 1;
            if self.consecutive_failures >= self.limit {
                self.phase = Phase::Unsynced;
                self.consecutive_failures = 0;
                self.fallbacks += 1;
            }
        }
    }
}

/// Captured frames between consecutive decodable pairs, when the pattern
/// repeats on a whole number of captures.
pub fn pair_stride(mode: Mode, fps_tx: u32, fps_rx: u32) -> Option<usize> {
    let captures = mode.frames_per_code() as u64 * fps_rx as u64;
    (fps_tx > 0 && captures % fps_tx as u64 == 0).then(|| (captures / fps_tx as u64) as usize)
}

// ---------------------------------------------------------------------------
// Results and metrics

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketResult {
    pub payload: Payload,
    /// Capture time of the first frame of the decoded pair.
    pub capture_ts_ms: f64,
    /// Capture time of the frame that completed the pair.
    pub completed_ts_ms: f64,
    /// Wall-clock time spent on the successful attempt.
    pub latency_ms: f64,
    /// Capture indices of the pair.
    pub frames: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthPacket {
    pub payload: Payload,
    /// Capture time of the first frame that showed the packet.
    pub first_capture_ms: Option<f64>,
}

/// Transmitted packets, for scoring a decode run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub packets: Vec<TruthPacket>,
}

impl GroundTruth {
    pub fn from_capture(cap: &CapturedSequence) -> Self {
        let mut first = vec![None; cap.packets.len()];
        for f in &cap.frames {
            if let Some(slot) = first.get_mut(f.packet) {
                slot.get_or_insert(f.timestamp_ms);
            }
        }
        Self {
            packets: cap
                .packets
                .iter()
                .zip(first)
                .map(|(p, first_capture_ms)| TruthPacket {
                    payload: p.payload,
                    first_capture_ms,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkMetrics {
    /// Fraction of transmitted packets that were decoded.
    pub psr: f64,
    pub transmitted: usize,
    /// Distinct transmitted packets decoded.
    pub successes: usize,
    /// Frame pairs handed to the reader.
    pub attempts: usize,
    /// Decoded payloads that were never transmitted.
    pub spurious: usize,
    /// Times the parity lock was lost.
    pub fallbacks: u32,
    /// Capture-timeline time from a packet's first captured frame to the
    /// frame that completed its decode, ms.
    pub response_time_samples: Vec<f64>,
    /// Wall-clock decode time per decoded packet, ms.
    pub latency_samples: Vec<f64>,
}

impl LinkMetrics {
    /// Nearest-rank percentile of the response times, `q` in `[0, 1]`.
    pub fn response_percentile(&self, q: f64) -> Option<f64> {
        percentile(&self.response_time_samples, q)
    }
}

/// Nearest-rank percentile, `q` in `[0, 1]`.
pub fn percentile(samples: &[f64], q: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = (q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

pub fn compute_metrics(results: &[PacketResult], truth: &GroundTruth) -> LinkMetrics {
    let index: HashMap<Payload, usize> = truth
        .packets
        .iter()
        .enumerate()
        .map(|(i, p)| (p.payload, i))
        .collect();
    let mut seen = HashSet::new();
    let mut m = LinkMetrics {
        transmitted: truth.packets.len(),
        ..LinkMetrics::default()
    };
    for r in results {
        match index.get(&r.payload) {
            Some(&i) => {
                if !seen.insert(i) {
                    continue;
                }
                m.successes += 1;
                m.latency_samples.push(r.latency_ms);
                if let Some(t0) = truth.packets[i].first_capture_ms {
                    m.response_time_samples.push(r.completed_ts_ms - t0);
                }
            }
            None => m.spurious += 1,
        }
    }
    if m.transmitted > 0 {
        m.psr = m.successes as f64 / m.transmitted as f64;
    }
    m
}

/// Empirical CDF: sorted distinct sample values with the fraction of
/// samples at or below each.
pub fn response_time_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => out.push((v, frac)),
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Stream decoding

/// A frame that reached the receiver.
#[derive(Debug, Clone, Copy)]
pub struct Delivered<'a> {
    /// Capture index, counting dropped frames.
    pub index: usize,
    pub timestamp_ms: f64,
    pub lab: &'a LabFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutcome {
    pub results: Vec<PacketResult>,
    pub attempts: usize,
    pub fallbacks: u32,
}

/// Decodes delivered frames pair by pair. The pair index runs over delivered
/// frames only, so a lost frame shifts the parity. Each payload is reported
/// once, at its first successful decode. `stride` comes from
/// [`pair_stride`].
pub fn decode_delivered(
    frames: &[Delivered],
    stride: Option<usize>,
    cfg: &DecoderConfig,
) -> StreamOutcome {
    let mut sync = SyncState::new(stride, cfg.resync_failures);
    let mut results = Vec::new();
    let mut seen = HashSet::new();
    let mut attempts = 0;
    for (k, pair) in frames.windows(2).enumerate() {
        if !sync.should_attempt(k) {
            continue;
        }
        let (a, b) = (&pair[0], &pair[1]);
        attempts += 1;
        let started = Instant::now();
        let outcome = decode_pair(a.lab, b.lab, cfg);
        let latency_ms = started.elapsed().as_secs_f64() * 1000.0;
        sync.record(k, outcome.is_ok());
        if let Ok(payload) = outcome {
            if seen.insert(payload) {
                results.push(PacketResult {
                    payload,
                    capture_ts_ms: a.timestamp_ms,
                    completed_ts_ms: b.timestamp_ms,
                    latency_ms,
                    frames: [a.index, b.index],
                });
            }
        }
    }
    StreamOutcome {
        results,
        attempts,
        fallbacks: sync.fallbacks,
    }
}

/// [`decode_delivered`] over a simulated capture, scored against the
/// packets it carried.
pub fn stream_decode(
    cap: &CapturedSequence,
    cfg: &DecoderConfig,
) -> (Vec<PacketResult>, LinkMetrics) {
    let delivered: Vec<Delivered> = cap
        .frames
        .iter()
        .enumerate()
        .filter_map(|(index, f)| {
            f.lab.as_ref().map(|lab| Delivered {
                index,
                timestamp_ms: f.timestamp_ms,
                lab,
            })
        })
        .collect();
    let out = decode_delivered(
        &delivered,
        pair_stride(cfg.mode, cap.fps_tx, cap.fps_rx),
        cfg,
    );
    let mut metrics = compute_metrics(&out.results, &GroundTruth::from_capture(cap));
    metrics.attempts = out.attempts;
    metrics.fallbacks = out.fallbacks;
    (out.results, metrics)
}
