//! Regional texture analysis.
//!
//! The contrast of a pixel is the GLCM contrast of the `n x n` window around
//! it, built from horizontal neighbour pairs. [`glcm_contrast_reference`]
//! builds the co-occurrence matrix for every pixel; [`contrast_optimized`]
//! uses the closed form (mean of squared horizontal differences) and never
//! materializes a matrix. Both clamp windows at the image border and
//! normalize by the number of pairs actually inside the clamped window.

use crate::error::Error;

/// A real-valued single-channel map: lightness images and every per-pixel
/// quantity derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

pub type GrayImage = ScalarMap;
pub type ContrastMap = ScalarMap;
pub type TextureMap = ScalarMap;
pub type AlphaMap = ScalarMap;
pub type DepthMap = ScalarMap;

impl ScalarMap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn same_size(&self, other: &ScalarMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Integer gray levels in `[0, levels)`, the input of the GLCM construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelImage {
    pub width: usize,
    pub height: usize,
    pub levels: usize,
    pub data: Vec<u16>,
}

impl LevelImage {
    pub fn new(width: usize, height: usize, levels: usize, data: Vec<u16>) -> Result<Self, Error> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::BufferSize {
                expected: width * height,
                actual: data.len(),
            });
        }
        if let Some(&level) = data.iter().find(|&&v| v as usize >= levels) {
            return Err(Error::LevelRange { level, levels });
        }
        Ok(Self {
            width,
            height,
            levels,
            data,
        })
    }

    /// Rounds lightness in `[0, 100]` onto `levels` evenly spaced levels.
    /// With 101 levels this is plain rounding to integer L*.
    pub fn quantize(img: &GrayImage, levels: usize) -> Self {
        let scale = (levels - 1) as f64 / 100.0;
        let data = img
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 100.0) * scale).round() as u16)
            .collect();
        Self {
            width: img.width,
            height: img.height,
            levels,
            data,
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TextureParams {
    /// Odd side length of the analysis window.
    pub window: usize,
    /// Floor of the texture scaling factor.
    pub k: f64,
    /// Gray-level count for the reference GLCM.
    pub ng: usize,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            window: 5,
            k: 0.5,
            ng: 101,
        }
    }
}

impl TextureParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::InvalidParam("window must be odd and at least 3"));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(Error::InvalidParam("k must lie in [0, 1]"));
        }
        if self.ng < 2 {
            return Err(Error::InvalidParam("ng must be at least 2"));
        }
        Ok(())
    }
}

/// Inclusive bounds of the window around `(x, y)` clamped to the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Window {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Window {
    fn around(x: usize, y: usize, half: usize, width: usize, height: usize) -> Self {
        Self {
            x0: x.saturating_sub(half),
            x1: (x + half).min(width - 1),
            y0: y.saturating_sub(half),
            y1: (y + half).min(height - 1),
        }
    }

    fn cols(&self) -> usize {
        self.x1 - self.x0 + 1
    }

    fn rows(&self) -> usize {
        self.y1 - self.y0 + 1
    }

    /// Number of horizontal neighbour pairs inside the window.
    fn pairs(&self) -> usize {
        self.rows() * (self.cols() - 1)
    }
}

fn check_window(p: &TextureParams, width: usize, height: usize) -> Result<(), Error> {
    p.validate()?;
    let half = p.window / 2;
    if half >= width && half >= height {
        return Err(Error::WindowTooLarge {
            window: p.window,
            width,
            height,
        });
    }
    Ok(())
}

/// Contrast through an explicit per-pixel co-occurrence matrix.
///
/// Slow by construction; it exists as the oracle for [`contrast_optimized`].
pub fn glcm_contrast_reference(img: &LevelImage, p: &TextureParams) -> Result<ContrastMap, Error> {
    check_window(p, img.width, img.height)?;
    let ng = p.ng;
    if let Some(&level) = img.data.iter().find(|&&v| v as usize >= ng) {
        return Err(Error::LevelRange { level, levels: ng });
    }
    let (w, h) = (img.width, img.height);
    let half = p.window / 2;
    let mut glcm = vec![0.0f64; ng * ng];
    let mut out = ContrastMap::filled(w, h, 0.0);

    for y in 0..h {
        for x in 0..w {
            let win = Window::around(x, y, half, w, h);
            let r = win.pairs();
            if r == 0 {
                continue;
            }
            glcm.iter_mut().for_each(|v| *v = 0.0);
            let inv_r = 1.0 / r as f64;
            for row in win.y0..=win.y1 {
                let line = &img.data[row * w..(row + 1) * w];
                for c in win.x0..win.x1 {
                    let i = line[c] as usize;
                    let j = line[c + 1] as usize;
                    glcm[i * ng + j] += inv_r;
                }
            }
            // sum over n of n^2 * (sum of p(i, j) with |i - j| = n)
            let mut contrast = 0.0;
            for n in 0..ng {
                let mut diag = 0.0;
                for i in 0..ng {
                    if i + n < ng {
                        diag += glcm[i * ng + i + n];
                    }
                    if n > 0 && i >= n {
                        diag += glcm[i * ng + i - n];
                    }
                }
                contrast += (n * n) as f64 * diag;
            }
            out.set(x, y, contrast);
        }
    }
    Ok(out)
}

/// Contrast as the window mean of squared horizontal differences.
pub fn contrast_optimized(img: &GrayImage, p: &TextureParams) -> Result<ContrastMap, Error> {
    check_window(p, img.width, img.height)?;
    let (w, h) = (img.width, img.height);
    let half = p.window / 2;

    // Per row, prefix sums of squared differences: prefix[c] = sum of D(0..c).
    let mut prefix = vec![0.0f64; h * w];
    for row in 0..h {
        let line = &img.data[row * w..(row + 1) * w];
        let pre = &mut prefix[row * w..(row + 1) * w];
        let mut acc = 0.0;
        for c in 0..w - 1 {
            let d = line[c] - line[c + 1];
            acc += d * d;
            pre[c + 1] = acc;
        }
    }

    let mut out = ContrastMap::filled(w, h, 0.0);
    let mut row_sums = vec![0.0f64; w];
    for y in 0..h {
        let y0 = y.saturating_sub(half);
        let y1 = (y + half).min(h - 1);
        row_sums.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..w {
            let x0 = x.saturating_sub(half);
            let x1 = (x + half).min(w - 1);
            let mut s = 0.0;
            for row in y0..=y1 {
                let pre = &prefix[row * w..(row + 1) * w];
                s += pre[x1] - pre[x0];
            }
            row_sums[x] = s;
        }
        for x in 0..w {
            let win = Window::around(x, y, half, w, h);
            let r = win.pairs();
            if r > 0 {
                out.set(x, y, (row_sums[x] / r as f64).max(0.0));
            }
        }
    }
    Ok(out)
}

/// Average texture: contrast divided by the clamped window's pixel count.
pub fn texture_metric(c: &ContrastMap, p: &TextureParams) -> TextureMap {
    let half = p.window / 2;
    let mut out = TextureMap::filled(c.width, c.height, 0.0);
    for y in 0..c.height {
        for x in 0..c.width {
            let win = Window::around(x, y, half, c.width, c.height);
            let s = (win.rows() * win.cols()) as f64;
            out.set(x, y, c.get(x, y) / s);
        }
    }
    out
}

/// Maps texture onto `[k, 1]` relative to the frame maximum. A textureless
/// frame scales every pixel by `k`.
pub fn texture_scaling(t: &TextureMap, p: &TextureParams) -> AlphaMap {
    let t_max = t.max();
    let k = p.k;
    let data = if t_max > 0.0 {
        t.data
            .iter()
            .map(|&v| ((v / t_max) * (1.0 - k) + k).clamp(k, 1.0))
            .collect()
    } else {
        vec![k; t.data.len()]
    };
    AlphaMap {
        width: t.width,
        height: t.height,
        data,
    }
}

pub fn modulation_depth(d1: &ScalarMap, alpha: &AlphaMap) -> Result<DepthMap, Error> {
    if !d1.same_size(alpha) {
        return Err(Error::DimensionMismatch("perceptual depth and alpha maps"));
    }
    Ok(DepthMap {
        width: d1.width,
        height: d1.height,
        data: d1
            .data
            .iter()
            .zip(&alpha.data)
            .map(|(d, a)| d * a)
            .collect(),
    })
}
