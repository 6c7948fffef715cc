//! Planar similarity transforms and bilinear warping.

use serde::{Deserialize, Serialize};

use crate::colorspace::LabFrame;

/// `(x, y) -> (a x - b y + tx, b x + a y + ty)` with `a = s cos(theta)`,
/// `b = s sin(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl Default for Similarity {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Similarity {
    pub const IDENTITY: Similarity = Similarity {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self {
            a: 1.0,
            b: 0.0,
            tx,
            ty,
        }
    }

    /// Rotation by `angle_rad` and scaling by `scale` about `(cx, cy)`,
    /// followed by a translation.
    pub fn about(cx: f64, cy: f64, scale: f64, angle_rad: f64, tx: f64, ty: f64) -> Self {
        let a = scale * angle_rad.cos();
        let b = scale * angle_rad.sin();
        Self {
            a,
            b,
            tx: cx - (a * cx - b * cy) + tx,
            ty: cy - (b * cx + a * cy) + ty,
        }
    }

    #[inline]
    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x - self.b * y + self.tx,
            self.b * x + self.a * y + self.ty,
        )
    }

    pub fn inverse(&self) -> Self {
        let det = self.a * self.a + self.b * self.b;
        let (ia, ib) = (self.a / det, -self.b / det);
        Self {
            a: ia,
            b: ib,
            tx: -(ia * self.tx - ib * self.ty),
            ty: -(ib * self.tx + ia * self.ty),
        }
    }

    /// `self` after `other`.
    pub fn compose(&self, other: &Similarity) -> Self {
        Self {
            a: self.a * other.a - self.b * other.b,
            b: self.b * other.a + self.a * other.b,
            tx: self.a * other.tx - self.b * other.ty + self.tx,
            ty: self.b * other.tx + self.a * other.ty + self.ty,
        }
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn angle(&self) -> f64 {
        self.b.atan2(self.a)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }

    /// Largest displacement of any corner of a `w x h` frame.
    pub fn max_displacement(&self, w: usize, h: usize) -> f64 {
        let corners = [
            (0.0, 0.0),
            (w as f64, 0.0),
            (0.0, h as f64),
            (w as f64, h as f64),
        ];
        corners
            .iter()
            .map(|&(x, y)| {
                let (u, v) = self.map(x, y);
                (u - x).hypot(v - y)
            })
            .fold(0.0, f64::max)
    }
}

/// Bilinear sample with coordinates clamped to the image.
#[inline]
pub fn sample_bilinear(data: &[f64], width: usize, height: usize, x: f64, y: f64) -> f64 {
    let x = x.clamp(0.0, (width - 1) as f64);
    let y = y.clamp(0.0, (height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = data[y0 * width + x0] * (1.0 - fx) + data[y0 * width + x1] * fx;
    let bottom = data[y1 * width + x0] * (1.0 - fx) + data[y1 * width + x1] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// `out(p) = channel(t(p))` for one channel.
pub fn warp_channel(data: &[f64], width: usize, height: usize, t: &Similarity) -> Vec<f64> {
    let mut out = Vec::with_capacity(data.len());
    for y in 0..height {
        for x in 0..width {
            let (u, v) = t.map(x as f64, y as f64);
            out.push(sample_bilinear(data, width, height, u, v));
        }
    }
    out
}

/// Resamples every channel of `frame` through `t`; samples falling outside
/// the frame take the nearest border value.
pub fn warp_lab(frame: &LabFrame, t: &Similarity) -> LabFrame {
    if t.is_identity() {
        return frame.clone();
    }
    let (w, h) = (frame.width, frame.height);
    LabFrame {
        width: w,
        height: h,
        l: warp_channel(&frame.l, w, h, t)
            .into_iter()
            .map(|v| v.clamp(0.0, 100.0))
            .collect(),
        a: warp_channel(&frame.a, w, h, t),
        b: warp_channel(&frame.b, w, h, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &Similarity, b: &Similarity) -> bool {
        (a.a - b.a).abs() < 1e-12
            && (a.b - b.b).abs() < 1e-12
            && (a.tx - b.tx).abs() < 1e-9
            && (a.ty - b.ty).abs() < 1e-9
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = Similarity::about(50.0, 40.0, 1.02, 0.03, 2.5, -1.25);
        assert!(close(&t.compose(&t.inverse()), &Similarity::IDENTITY));
        assert!(close(&t.inverse().compose(&t), &Similarity::IDENTITY));
        let (x, y) = t.map(50.0, 40.0);
        assert!((x - 52.5).abs() < 1e-12 && (y - 38.75).abs() < 1e-12);
    }

    #[test]
    fn bilinear_is_exact_on_grid() {
        let data: Vec<f64> = (0..12).map(|v| v as f64).collect();
        assert_eq!(sample_bilinear(&data, 4, 3, 2.0, 1.0), 6.0);
        assert_eq!(sample_bilinear(&data, 4, 3, 1.5, 0.0), 1.5);
        assert_eq!(sample_bilinear(&data, 4, 3, -5.0, 9.0), 8.0);
    }
}
