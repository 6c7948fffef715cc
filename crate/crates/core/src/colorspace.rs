//! sRGB <-> CIELAB conversion and the perception-driven lightness depth.
//!
//! All conversions use the D65 white point, the 2 degree observer and the
//! standard sRGB transfer curve. Lab channels are kept as `f64`; quantization
//! to 8 bits only happens in [`lab_to_srgb`].

use std::sync::LazyLock;

use crate::error::Error;

/// Linear sRGB -> XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// Reference white, taken as the image of linear (1, 1, 1) so that neutral
/// sRGB grays land exactly on a* = b* = 0.
static WHITE: LazyLock<[f64; 3]> = LazyLock::new(|| {
    let m = &RGB_TO_XYZ;
    [
        m[0][0] + m[0][1] + m[0][2],
        m[1][0] + m[1][1] + m[1][2],
        m[2][0] + m[2][1] + m[2][2],
    ]
});

static XYZ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_XYZ));

static DECODE_LUT: LazyLock<[f64; 256]> = LazyLock::new(|| {
    let mut lut = [0.0; 256];
    for (i, v) in lut.iter_mut().enumerate() {
        *v = srgb_decode(i as f64 / 255.0);
    }
    lut
});

const EPSILON: f64 = 216.0 / 24389.0; // (6/29)^3
const KAPPA: f64 = 24389.0 / 27.0;

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv = 1.0 / det;
    [
        [
            (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ]
}

fn srgb_decode(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

/// Converts one 8-bit sRGB triplet to (L*, a*, b*).
pub fn rgb_to_lab_pixel(rgb: [u8; 3]) -> [f64; 3] {
    let lut = &*DECODE_LUT;
    let lin = [
        lut[rgb[0] as usize],
        lut[rgb[1] as usize],
        lut[rgb[2] as usize],
    ];
    let m = &RGB_TO_XYZ;
    let w = &*WHITE;
    let mut f = [0.0; 3];
    for (k, fk) in f.iter_mut().enumerate() {
        let v = m[k][0] * lin[0] + m[k][1] * lin[1] + m[k][2] * lin[2];
        *fk = lab_f(v / w[k]);
    }
    let l = (116.0 * f[1] - 16.0).clamp(0.0, 100.0);
    [l, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Converts (L*, a*, b*) to an 8-bit sRGB triplet, clamping out-of-gamut
/// channels.
pub fn lab_to_rgb_pixel(lab: [f64; 3]) -> [u8; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let w = &*WHITE;
    let xyz = [
        lab_f_inv(fx) * w[0],
        lab_f_inv(fy) * w[1],
        lab_f_inv(fz) * w[2],
    ];
    let m = &*XYZ_TO_RGB;
    let mut out = [0u8; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let lin = m[k][0] * xyz[0] + m[k][1] * xyz[1] + m[k][2] * xyz[2];
        let enc = srgb_encode(lin.clamp(0.0, 1.0));
        *o = (enc * 255.0).round().clamp(0.0, 255.0) as u8;
    }
    out
}

/// An 8-bit sRGB frame, row-major RGB triplets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height * 3 {
            return Err(Error::BufferSize {
                expected: width * height * 3,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self, Error> {
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Per-pixel CIELAB image. Lightness is kept within `[0, 100]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabFrame {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl LabFrame {
    pub fn new(
        width: usize,
        height: usize,
        l: Vec<f64>,
        a: Vec<f64>,
        b: Vec<f64>,
    ) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        let n = width * height;
        for len in [l.len(), a.len(), b.len()] {
            if len != n {
                return Err(Error::BufferSize {
                    expected: n,
                    actual: len,
                });
            }
        }
        if l.iter().any(|v| !(0.0..=100.0).contains(v)) {
            return Err(Error::LightnessRange);
        }
        Ok(Self {
            width,
            height,
            l,
            a,
            b,
        })
    }

    /// Neutral frame of constant lightness.
    pub fn uniform(width: usize, height: usize, lightness: f64) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            l: vec![lightness.clamp(0.0, 100.0); n],
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn same_size(&self, other: &LabFrame) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// The same frame with a replacement lightness channel; chroma is copied.
    pub fn with_lightness(&self, l: Vec<f64>) -> LabFrame {
        debug_assert_eq!(l.len(), self.len());
        LabFrame {
            width: self.width,
            height: self.height,
            l,
            a: self.a.clone(),
            b: self.b.clone(),
        }
    }
}

pub fn srgb_to_lab(frame: &RgbFrame) -> LabFrame {
    let n = frame.width * frame.height;
    let mut l = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    for px in frame.data.chunks_exact(3) {
        let lab = rgb_to_lab_pixel([px[0], px[1], px[2]]);
        l.push(lab[0]);
        a.push(lab[1]);
        b.push(lab[2]);
    }
    LabFrame {
        width: frame.width,
        height: frame.height,
        l,
        a,
        b,
    }
}

pub fn lab_to_srgb(frame: &LabFrame) -> RgbFrame {
    let mut data = Vec::with_capacity(frame.len() * 3);
    for i in 0..frame.len() {
        data.extend_from_slice(&lab_to_rgb_pixel([frame.l[i], frame.a[i], frame.b[i]]));
    }
    RgbFrame {
        width: frame.width,
        height: frame.height,
        data,
    }
}

/// Viewing parameters of the perceptual lightness step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerceptionParams {
    /// Target perceived difference between complementary pixels.
    pub delta_e00: f64,
    /// Viewing-condition factor.
    pub k_l: f64,
}

impl PerceptionParams {
    pub fn new(delta_e00: f64, k_l: f64) -> Result<Self, Error> {
        let p = Self { delta_e00, k_l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.delta_e00 > 0.0) || !self.delta_e00.is_finite() {
            return Err(Error::InvalidParam("delta_e00 must be positive"));
        }
        if !(self.k_l > 0.0) || !self.k_l.is_finite() {
            return Err(Error::InvalidParam("k_l must be positive"));
        }
        Ok(())
    }
}

impl Default for PerceptionParams {
    fn default() -> Self {
        Self {
            delta_e00: 2.0,
            k_l: 1.0,
        }
    }
}

/// Lightness change that produces a perceived difference of `delta_e00` at
/// lightness `l_star`, from the lightness term of CIEDE2000.
pub fn perceptual_delta(l_star: f64, p: &PerceptionParams) -> f64 {
    let d = l_star - 50.0;
    let d2 = d * d;
    p.k_l * (1.0 + 0.015 * d2 / (20.0 + d2).sqrt()) * p.delta_e00
}
