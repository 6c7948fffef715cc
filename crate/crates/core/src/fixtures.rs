//! Seeded synthetic source images.
//!
//! The textured fixture stands in for natural video content: a smooth
//! lightness gradient with soft-edged patches that give the texture analysis
//! rough and flat regions and the motion filter corners to track.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::{lab_to_srgb, LabFrame, RgbFrame};

/// Textured Lab image, L* within roughly `[10, 90]`.
pub fn textured_lab(width: usize, height: usize, seed: u64) -> LabFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l = vec![0.0f64; width * height];
    for y in 0..height {
        for x in 0..width {
            let gx = x as f64 / width as f64;
            let gy = y as f64 / height as f64;
            l[y * width + x] = 38.0 + 22.0 * gx + 6.0 * (6.0 * gy).sin();
        }
    }
    let patches = (width * height / 300).max(4);
    for _ in 0..patches {
        let w = rng.random_range(5..=18usize);
        let h = rng.random_range(5..=18usize);
        let x0 = rng.random_range(0..width);
        let y0 = rng.random_range(0..height);
        let delta = rng.random_range(12.0..28.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        for y in y0..(y0 + h).min(height) {
            for x in x0..(x0 + w).min(width) {
                l[y * width + x] += delta;
            }
        }
    }
    // soften patch edges (replicated borders)
    let blurred = blur(&l, width, height, 1.2);
    let l = blurred.into_iter().map(|v| v.clamp(8.0, 92.0)).collect();
    let a_bias = rng.random_range(-6.0..6.0);
    let b_bias = rng.random_range(-6.0..6.0);
    let a = (0..width * height)
        .map(|i| a_bias + 4.0 * ((i % width) as f64 / width as f64 - 0.5))
        .collect();
    let b = (0..width * height)
        .map(|i| b_bias + 4.0 * ((i / width) as f64 / height as f64 - 0.5))
        .collect();
    LabFrame {
        width,
        height,
        l,
        a,
        b,
    }
}

pub fn textured_rgb(width: usize, height: usize, seed: u64) -> RgbFrame {
    lab_to_srgb(&textured_lab(width, height, seed))
}

fn blur(values: &[f64], width: usize, height: usize, sigma: f64) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let taps = crate::encoder::gaussian_kernel(sigma);
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xx = (x as isize + k as isize - r).clamp(0, width as isize - 1) as usize;
                acc += t * values[y * width + xx];
            }
            tmp[y * width + x] = acc;
        }
    }
    for y in 0..height {
        for x in 0..width {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yy = (y as isize + k as isize - r).clamp(0, height as isize - 1) as usize;
                acc += t * tmp[yy * width + x];
            }
            out[y * width + x] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_seeded() {
        assert_eq!(textured_lab(40, 30, 3), textured_lab(40, 30, 3));
        assert_ne!(textured_lab(40, 30, 3), textured_lab(40, 30, 4));
    }

    #[test]
    fn fixture_has_texture_range() {
        let f = textured_lab(128, 96, 1);
        let (lo, hi) =
            f.l.iter()
                .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(lo >= 8.0 && hi <= 92.0);
        assert!(hi - lo > 30.0);
    }
}
