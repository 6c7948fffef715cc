//! Complementary-frame lightness modulation.
//!
//! For every source frame the payload is rendered as a ternary bit plane,
//! blurred with a Gaussian, multiplied by the per-pixel depth (perceptual
//! step scaled by local texture) and added to / subtracted from L*.

use serde::{Deserialize, Serialize};

use crate::barcode::{encode_payload, render_tiles, BitPlane, EcLevel, Payload, Rect, TileLayout};
use crate::colorspace::{perceptual_delta, srgb_to_lab, LabFrame, PerceptionParams, RgbFrame};
use crate::error::Error;
use crate::texture::{
    contrast_optimized, modulation_depth, texture_metric, texture_scaling, DepthMap, GrayImage,
    ScalarMap, TextureParams,
};

/// Display frames emitted per code frame, and their modulation signs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// `[+, -]`
    Pair,
    /// `[+, +, -, -]`
    Trivial4,
    /// `[0, +, 0, -]`
    Step4,
}

impl Mode {
    pub fn pattern(self) -> &'static [Role] {
        match self {
            Mode::Pair => &[Role::Plus, Role::Minus],
            Mode::Trivial4 => &[Role::Plus, Role::Plus, Role::Minus, Role::Minus],
            Mode::Step4 => &[Role::Rest, Role::Plus, Role::Rest, Role::Minus],
        }
    }

    /// Ratio of display rate to code rate.
    pub fn frames_per_code(self) -> usize {
        self.pattern().len()
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Pair => "pair",
            Mode::Trivial4 => "trivial4",
            Mode::Step4 => "step4",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "pair" => Ok(Mode::Pair),
            "trivial4" => Ok(Mode::Trivial4),
            "step4" => Ok(Mode::Step4),
            _ => Err(Error::InvalidParam("mode must be pair, trivial4 or step4")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Plus,
    Minus,
    Rest,
}

impl Role {
    fn sign(self) -> f64 {
        match self {
            Role::Plus => 1.0,
            Role::Minus => -1.0,
            Role::Rest => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub perception: PerceptionParams,
    pub texture: TextureParams,
    pub layout: TileLayout,
    pub ec: EcLevel,
    /// Gaussian sigma in pixels; 0 disables smoothing.
    pub smoothing_sigma: f64,
    pub mode: Mode,
    /// Display frame rate.
    pub fps_tx: u32,
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self {
            perception: PerceptionParams::default(),
            texture: TextureParams::default(),
            layout: TileLayout::default(),
            ec: EcLevel::L,
            smoothing_sigma: 1.0,
            mode: Mode::Pair,
            fps_tx: 60,
        }
    }
}

impl ModulationParams {
    pub fn validate(&self) -> Result<(), Error> {
        self.perception.validate()?;
        self.texture.validate()?;
        self.layout.validate()?;
        if !(self.smoothing_sigma >= 0.0) || !self.smoothing_sigma.is_finite() {
            return Err(Error::InvalidParam("smoothing_sigma must be non-negative"));
        }
        if self.fps_tx == 0 || self.fps_tx as usize % self.mode.frames_per_code() != 0 {
            return Err(Error::InvalidParam(
                "fps_tx must be a positive multiple of the mode's frames per code",
            ));
        }
        Ok(())
    }

    /// Code frames per second.
    pub fn code_rate(&self) -> f64 {
        self.fps_tx as f64 / self.mode.frames_per_code() as f64
    }
}

/// Smoothed bit plane, values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPlane {
    pub width: usize,
    pub height: usize,
    pub s: Vec<f64>,
}

impl SmoothPlane {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.s[y * self.width + x]
    }
}

/// Normalized Gaussian taps of radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

pub fn kernel_radius(sigma: f64) -> usize {
    gaussian_kernel(sigma).len() / 2
}

/// Separable Gaussian blur of the bit plane; the plane is zero outside the
/// frame. `sigma <= 0` is the identity.
pub fn smooth_bitplane(b: &BitPlane, sigma: f64) -> SmoothPlane {
    let src: Vec<f64> = b.s.iter().map(|&v| v as f64).collect();
    SmoothPlane {
        width: b.width,
        height: b.height,
        s: gaussian_blur(&src, b.width, b.height, sigma),
    }
}

/// Separable Gaussian blur with zero outside the image; `sigma <= 0` copies.
pub fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return src.to_vec();
    }
    let taps = gaussian_kernel(sigma);
    let r = (taps.len() / 2) as isize;

    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = x as isize + k as isize - r;
                if xx >= 0 && (xx as usize) < w {
                    acc += t * row[xx as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, t) in taps.iter().enumerate() {
            let yy = y as isize + k as isize - r;
            if yy < 0 || yy as usize >= h {
                continue;
            }
            let src_row = &tmp[yy as usize * w..(yy as usize + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += t * s;
            }
        }
    }
    out
}

/// Per-pixel depth: the perceptual lightness step scaled by local texture.
pub fn depth_map(lab: &LabFrame, mp: &ModulationParams) -> Result<DepthMap, Error> {
    let gray = GrayImage {
        width: lab.width,
        height: lab.height,
        data: lab.l.clone(),
    };
    let contrast = contrast_optimized(&gray, &mp.texture)?;
    let alpha = texture_scaling(&texture_metric(&contrast, &mp.texture), &mp.texture);
    let d1 = ScalarMap {
        width: lab.width,
        height: lab.height,
        data: lab
            .l
            .iter()
            .map(|&l| perceptual_delta(l, &mp.perception))
            .collect(),
    };
    modulation_depth(&d1, &alpha)
}

/// Signed lightness offset of the `+` frame, clipped so that `l +- offset`
/// stays inside `[0, 100]`.
#[inline]
pub fn signed_offset(l: f64, s: f64, depth: f64) -> f64 {
    let eff = (depth * s.abs()).min(l).min(100.0 - l).max(0.0);
    if s > 0.0 {
        eff
    } else if s < 0.0 {
        -eff
    } else {
        0.0
    }
}

fn check_dims(lab: &LabFrame, s: &SmoothPlane, d: &DepthMap) -> Result<(), Error> {
    if lab.width != s.width || lab.height != s.height {
        return Err(Error::DimensionMismatch("frame and smooth plane"));
    }
    if lab.width != d.width || lab.height != d.height {
        return Err(Error::DimensionMismatch("frame and depth map"));
    }
    Ok(())
}

fn offsets(lab: &LabFrame, s: &SmoothPlane, d: &DepthMap) -> Vec<f64> {
    lab.l
        .iter()
        .zip(&s.s)
        .zip(&d.data)
        .map(|((&l, &sv), &dv)| signed_offset(l, sv, dv))
        .collect()
}

fn apply(lab: &LabFrame, offsets: &[f64], sign: f64) -> LabFrame {
    if sign == 0.0 {
        return lab.clone();
    }
    let l = lab
        .l
        .iter()
        .zip(offsets)
        .map(|(&l, &o)| (l + sign * o).clamp(0.0, 100.0))
        .collect();
    lab.with_lightness(l)
}

/// The complementary pair `(L + s*D, L - s*D)`; chroma is untouched.
pub fn modulate_pair(
    lab: &LabFrame,
    s: &SmoothPlane,
    d: &DepthMap,
) -> Result<(LabFrame, LabFrame), Error> {
    check_dims(lab, s, d)?;
    let off = offsets(lab, s, d);
    Ok((apply(lab, &off, 1.0), apply(lab, &off, -1.0)))
}

/// Four display frames for one code frame.
pub fn step_encode(
    lab: &LabFrame,
    s: &SmoothPlane,
    d: &DepthMap,
    mode: Mode,
) -> Result<[LabFrame; 4], Error> {
    if mode == Mode::Pair {
        return Err(Error::InvalidMode(mode));
    }
    check_dims(lab, s, d)?;
    let off = offsets(lab, s, d);
    let p = mode.pattern();
    Ok([
        apply(lab, &off, p[0].sign()),
        apply(lab, &off, p[1].sign()),
        apply(lab, &off, p[2].sign()),
        apply(lab, &off, p[3].sign()),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedFrame {
    pub lab: LabFrame,
    pub role: Role,
    /// Index into [`EncodedSequence::packets`].
    pub packet: usize,
}

/// Ground truth for one transmitted code frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketInfo {
    pub payload: Payload,
    pub first_frame: usize,
    pub tiles: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    pub frames: Vec<EncodedFrame>,
    pub packets: Vec<PacketInfo>,
    pub fps_tx: u32,
    pub mode: Mode,
}

/// Everything the encoder derives from one source frame and its payload.
#[derive(Debug, Clone)]
pub struct CodeFrame {
    pub plane: BitPlane,
    pub smooth: SmoothPlane,
    pub depth: DepthMap,
}

pub fn prepare_code_frame(
    lab: &LabFrame,
    payload: &Payload,
    mp: &ModulationParams,
) -> Result<CodeFrame, Error> {
    let matrix = encode_payload(payload, mp.ec)?;
    let plane = render_tiles(&matrix, lab.width, lab.height, &mp.layout)?;
    let smooth = smooth_bitplane(&plane, mp.smoothing_sigma);
    let depth = depth_map(lab, mp)?;
    Ok(CodeFrame {
        plane,
        smooth,
        depth,
    })
}

/// Emits the display frames of one code frame according to `mode`.
pub fn modulate(lab: &LabFrame, code: &CodeFrame, mode: Mode) -> Result<Vec<LabFrame>, Error> {
    Ok(match mode {
        Mode::Pair => {
            let (plus, minus) = modulate_pair(lab, &code.smooth, &code.depth)?;
            vec![plus, minus]
        }
        _ => step_encode(lab, &code.smooth, &code.depth, mode)?.into(),
    })
}

pub fn encode_video(
    frames: &[RgbFrame],
    payloads: &[Payload],
    mp: &ModulationParams,
) -> Result<EncodedSequence, Error> {
    if frames.len() != payloads.len() {
        return Err(Error::PayloadCount {
            frames: frames.len(),
            payloads: payloads.len(),
        });
    }
    let labs: Vec<LabFrame> = frames.iter().map(srgb_to_lab).collect();
    encode_lab_video(&labs, payloads, mp)
}

/// [`encode_video`] on frames that are already in Lab.
pub fn encode_lab_video(
    frames: &[LabFrame],
    payloads: &[Payload],
    mp: &ModulationParams,
) -> Result<EncodedSequence, Error> {
    mp.validate()?;
    if frames.len() != payloads.len() {
        return Err(Error::PayloadCount {
            frames: frames.len(),
            payloads: payloads.len(),
        });
    }
    let per = mp.mode.frames_per_code();
    let mut out = EncodedSequence {
        frames: Vec::with_capacity(frames.len() * per),
        packets: Vec::with_capacity(frames.len()),
        fps_tx: mp.fps_tx,
        mode: mp.mode,
    };
    for (i, (lab, payload)) in frames.iter().zip(payloads).enumerate() {
        let code = prepare_code_frame(lab, payload, mp)?;
        out.packets.push(PacketInfo {
            payload: *payload,
            first_frame: out.frames.len(),
            tiles: code.plane.tiles.clone(),
        });
        for (lab, &role) in modulate(lab, &code, mp.mode)?
            .into_iter()
            .zip(mp.mode.pattern())
        {
            out.frames.push(EncodedFrame {
                lab,
                role,
                packet: i,
            });
        }
    }
    Ok(out)
}

/// Encodes a still source: every payload rides on the same frame, so the
/// depth map is computed once.
pub fn encode_still(
    lab: &LabFrame,
    payloads: &[Payload],
    mp: &ModulationParams,
) -> Result<EncodedSequence, Error> {
    mp.validate()?;
    let depth = depth_map(lab, mp)?;
    let per = mp.mode.frames_per_code();
    let mut out = EncodedSequence {
        frames: Vec::with_capacity(payloads.len() * per),
        packets: Vec::with_capacity(payloads.len()),
        fps_tx: mp.fps_tx,
        mode: mp.mode,
    };
    for (i, payload) in payloads.iter().enumerate() {
        let plane = render_tiles(
            &encode_payload(payload, mp.ec)?,
            lab.width,
            lab.height,
            &mp.layout,
        )?;
        let smooth = smooth_bitplane(&plane, mp.smoothing_sigma);
        out.packets.push(PacketInfo {
            payload: *payload,
            first_frame: out.frames.len(),
            tiles: plane.tiles.clone(),
        });
        let code = CodeFrame {
            plane,
            smooth,
            depth: depth.clone(),
        };
        for (lab, &role) in modulate(lab, &code, mp.mode)?
            .into_iter()
            .zip(mp.mode.pattern())
        {
            out.frames.push(EncodedFrame {
                lab,
                role,
                packet: i,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barcode::encode_payload;
    use crate::fixtures;

    fn plane_from(w: usize, h: usize, s: Vec<i8>) -> BitPlane {
        BitPlane {
            width: w,
            height: h,
            s,
            tiles: vec![],
        }
    }

    fn smooth_const(w: usize, h: usize, v: f64) -> SmoothPlane {
        SmoothPlane {
            width: w,
            height: h,
            s: vec![v; w * h],
        }
    }

    /// Direct 2-D convolution with the truncated Gaussian; independent of the
    /// separable implementation.
    fn direct_blur(b: &BitPlane, sigma: f64, x: usize, y: usize) -> f64 {
        let r = (3.0 * sigma).ceil() as isize;
        let (mut num, mut den) = (0.0, 0.0);
        for dy in -r..=r {
            for dx in -r..=r {
                let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                den += wgt;
                let (xx, yy) = (x as isize + dx, y as isize + dy);
                if xx >= 0 && yy >= 0 && (xx as usize) < b.width && (yy as usize) < b.height {
                    num += wgt * b.get(xx as usize, yy as usize) as f64;
                }
            }
        }
        num / den
    }

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.5, 1.0, 1.7, 3.0] {
            let k = gaussian_kernel(sigma);
            assert_eq!(k.len(), 2 * (3.0 * sigma).ceil() as usize + 1);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_sigma_is_identity() {
        let b = plane_from(3, 1, vec![1, 0, -1]);
        assert_eq!(smooth_bitplane(&b, 0.0).s, vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn smoothing_matches_direct_convolution() {
        let m = encode_payload(&Payload::new(1, 2), EcLevel::L).unwrap();
        let b = render_tiles(&m, 140, 130, &TileLayout::default()).unwrap();
        let sm = smooth_bitplane(&b, 1.0);
        let tile = b.tiles[0];
        // a module edge inside the code, and the tile border
        let mut checked_edge = false;
        for y in tile.y..tile.bottom() {
            for x in tile.x..tile.right() - 1 {
                let want = direct_blur(&b, 1.0, x, y);
                assert!((sm.get(x, y) - want).abs() < 1e-12);
                if b.get(x, y) != b.get(x + 1, y) && !checked_edge {
                    let v = sm.get(x, y).abs();
                    assert!(v > 0.0 && v < 1.0);
                    checked_edge = true;
                }
            }
        }
        assert!(checked_edge);
        let border = sm.get(tile.x, tile.y + tile.h / 2);
        assert!(border > 0.0 && border < 1.0);
        // interior of the light quiet zone keeps its value
        assert!((sm.get(tile.x + 8, tile.y + 8) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_plane_vanishes_outside_dilated_tiles() {
        let m = encode_payload(&Payload::new(1, 2), EcLevel::L).unwrap();
        let b = render_tiles(&m, 160, 150, &TileLayout::default()).unwrap();
        let sm = smooth_bitplane(&b, 1.5);
        let r = kernel_radius(1.5);
        let t = b.tiles[0];
        for y in 0..b.height {
            for x in 0..b.width {
                let near = x + r >= t.x && x < t.right() + r && y + r >= t.y && y < t.bottom() + r;
                if !near {
                    assert_eq!(sm.get(x, y), 0.0);
                }
            }
        }
    }

    #[test]
    fn uniform_mid_gray_depth() {
        let lab = LabFrame::uniform(32, 32, 50.0);
        let mp = ModulationParams::default();
        let d = depth_map(&lab, &mp).unwrap();
        assert!(d.data.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn depth_bounded_by_perceptual_step() {
        let lab = fixtures::textured_lab(96, 80, 5);
        let mp = ModulationParams::default();
        let d = depth_map(&lab, &mp).unwrap();
        let mut hit_max = false;
        for (i, &dv) in d.data.iter().enumerate() {
            let d1 = perceptual_delta(lab.l[i], &mp.perception);
            assert!(dv >= mp.texture.k * d1 - 1e-12 && dv <= d1 + 1e-12);
            hit_max |= (dv - d1).abs() < 1e-12;
        }
        // alpha reaches 1 at the roughest pixel
        assert!(hit_max);
    }

    #[test]
    fn pair_examples() {
        let lab = LabFrame::uniform(1, 1, 50.0);
        let d = DepthMap::filled(1, 1, 2.0);
        let (p, m) = modulate_pair(&lab, &smooth_const(1, 1, 1.0), &d).unwrap();
        assert_eq!((p.l[0], m.l[0]), (52.0, 48.0));
        let (p, m) = modulate_pair(&lab, &smooth_const(1, 1, 0.0), &d).unwrap();
        assert_eq!((p.l[0], m.l[0]), (50.0, 50.0));
        let bright = LabFrame::uniform(1, 1, 99.5);
        let (p, m) = modulate_pair(&bright, &smooth_const(1, 1, 1.0), &d).unwrap();
        assert_eq!((p.l[0], m.l[0]), (100.0, 99.0));
        let bad = DepthMap::filled(2, 1, 2.0);
        assert!(modulate_pair(&lab, &smooth_const(1, 1, 1.0), &bad).is_err());
    }

    #[test]
    fn chroma_is_copied() {
        let mut lab = LabFrame::uniform(2, 1, 40.0);
        lab.a = vec![12.0, -3.0];
        lab.b = vec![5.5, 7.0];
        let d = DepthMap::filled(2, 1, 2.0);
        let (p, m) = modulate_pair(&lab, &smooth_const(2, 1, -1.0), &d).unwrap();
        assert_eq!((&p.a, &p.b), (&lab.a, &lab.b));
        assert_eq!((&m.a, &m.b), (&lab.a, &lab.b));
        assert_eq!(p.l, vec![38.0, 38.0]);
    }

    #[test]
    fn four_frame_patterns() {
        let lab = LabFrame::uniform(1, 1, 50.0);
        let s = smooth_const(1, 1, 1.0);
        let d = DepthMap::filled(1, 1, 2.0);
        let step: Vec<f64> = step_encode(&lab, &s, &d, Mode::Step4)
            .unwrap()
            .iter()
            .map(|f| f.l[0])
            .collect();
        assert_eq!(step, vec![50.0, 52.0, 50.0, 48.0]);
        let triv: Vec<f64> = step_encode(&lab, &s, &d, Mode::Trivial4)
            .unwrap()
            .iter()
            .map(|f| f.l[0])
            .collect();
        assert_eq!(triv, vec![52.0, 52.0, 48.0, 48.0]);
        assert_eq!(step.iter().sum::<f64>() / 4.0, 50.0);
        assert_eq!(triv.iter().sum::<f64>() / 4.0, 50.0);
        assert_eq!(
            step_encode(&lab, &s, &d, Mode::Pair),
            Err(Error::InvalidMode(Mode::Pair))
        );
    }

    fn uniform_rgb(n: usize) -> Vec<RgbFrame> {
        (0..n)
            .map(|_| RgbFrame::filled(160, 160, [119, 119, 119]).unwrap())
            .collect()
    }

    fn payloads(n: usize) -> Vec<Payload> {
        (0..n as u64).map(|f| Payload::new(1, f)).collect()
    }

    #[test]
    fn video_roles_follow_mode() {
        let mp = ModulationParams::default();
        let seq = encode_video(&uniform_rgb(10), &payloads(10), &mp).unwrap();
        assert_eq!(seq.frames.len(), 20);
        for (i, f) in seq.frames.iter().enumerate() {
            assert_eq!(f.role, if i % 2 == 0 { Role::Plus } else { Role::Minus });
            assert_eq!(f.packet, i / 2);
        }
        let step = ModulationParams {
            mode: Mode::Step4,
            fps_tx: 120,
            ..mp
        };
        let seq = encode_video(&uniform_rgb(10), &payloads(10), &step).unwrap();
        assert_eq!(seq.frames.len(), 40);
        let roles: Vec<Role> = seq.frames[..4].iter().map(|f| f.role).collect();
        assert_eq!(roles, vec![Role::Rest, Role::Plus, Role::Rest, Role::Minus]);
        assert_eq!(seq.packets[3].first_frame, 12);
    }

    #[test]
    fn video_errors() {
        let mp = ModulationParams::default();
        assert!(matches!(
            encode_video(&uniform_rgb(2), &payloads(3), &mp),
            Err(Error::PayloadCount { .. })
        ));
        let tiny = vec![RgbFrame::filled(40, 40, [0, 0, 0]).unwrap()];
        assert!(matches!(
            encode_video(&tiny, &payloads(1), &mp),
            Err(Error::LayoutOverflow { .. })
        ));
    }

    #[test]
    fn background_is_untouched_and_mean_preserved() {
        let lab = fixtures::textured_lab(160, 160, 9);
        for mode in [Mode::Pair, Mode::Trivial4, Mode::Step4] {
            let mp = ModulationParams {
                mode,
                fps_tx: 120,
                ..ModulationParams::default()
            };
            let code = prepare_code_frame(&lab, &Payload::new(2, 5), &mp).unwrap();
            let out = modulate(&lab, &code, mode).unwrap();
            for i in 0..lab.len() {
                let mean = out.iter().map(|f| f.l[i]).sum::<f64>() / out.len() as f64;
                assert!((mean - lab.l[i]).abs() < 1e-12);
                if code.smooth.s[i] == 0.0 {
                    assert!(out.iter().all(|f| f.l[i] == lab.l[i]));
                }
            }
        }
    }

    #[test]
    fn larger_delta_e_never_shrinks_depth() {
        let lab = fixtures::textured_lab(128, 128, 1);
        let mut prev: Option<Vec<f64>> = None;
        for de in [1.0, 1.4, 2.0, 2.6, 3.0] {
            let mp = ModulationParams {
                perception: PerceptionParams::new(de, 1.0).unwrap(),
                ..ModulationParams::default()
            };
            let code = prepare_code_frame(&lab, &Payload::new(1, 1), &mp).unwrap();
            let eff: Vec<f64> = (0..lab.len())
                .map(|i| signed_offset(lab.l[i], code.smooth.s[i], code.depth.data[i]).abs())
                .collect();
            if let Some(p) = &prev {
                assert!(p.iter().zip(&eff).all(|(a, b)| b >= a));
            }
            prev = Some(eff);
        }
    }

    #[test]
    fn still_encoding_matches_video_encoding() {
        let src = fixtures::textured_lab(140, 140, 6);
        let payloads = [Payload::new(1, 0), Payload::new(1, 1)];
        let mp = ModulationParams::default();
        let video = encode_lab_video(&[src.clone(), src.clone()], &payloads, &mp).unwrap();
        assert_eq!(encode_still(&src, &payloads, &mp).unwrap(), video);
    }
}
