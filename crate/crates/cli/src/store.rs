//! Frame stores: a directory of numbered 8-bit PPM/PGM images plus a JSON
//! manifest.
//!
//! File names carry the frame index zero-padded to six digits, so the
//! lexicographic order of the files is their temporal order. Indices listed
//! as `missing` have no file (frames lost in capture).

use std::fs;
use std::path::{Path, PathBuf};

use ambilink_core::colorspace::RgbFrame;
use anyhow::{bail, ensure, Context, Result};
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelFormat {
    Rgb8,
    Gray8,
}

impl PixelFormat {
    fn extension(self) -> &'static str {
        match self {
            PixelFormat::Rgb8 => "ppm",
            PixelFormat::Gray8 => "pgm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: u32,
    pub width: usize,
    pub height: usize,
    /// Number of image files present.
    pub count: usize,
    pub pixel_format: PixelFormat,
    #[serde(default)]
    pub missing: Vec<usize>,
}

impl Manifest {
    /// Total frame slots, files and missing entries together.
    pub fn slots(&self) -> usize {
        self.count + self.missing.len()
    }
}

/// A loaded store. `frames[i]` is `None` for missing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStore {
    pub manifest: Manifest,
    pub frames: Vec<Option<RgbFrame>>,
}

pub fn frame_path(dir: &Path, index: usize, format: PixelFormat) -> PathBuf {
    dir.join(format!("{index:06}.{}", format.extension()))
}

impl FrameStore {
    pub fn new(fps: u32, frames: Vec<Option<RgbFrame>>) -> Result<Self> {
        let first = frames
            .iter()
            .flatten()
            .next()
            .context("frame store has no frames")?;
        let (width, height) = (first.width(), first.height());
        for f in frames.iter().flatten() {
            ensure!(
                f.width() == width && f.height() == height,
                "frame size {}x{} differs from {width}x{height}",
                f.width(),
                f.height()
            );
        }
        let missing = frames
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_none())
            .map(|(i, _)| i)
            .collect::<Vec<_>>();
        Ok(Self {
            manifest: Manifest {
                fps,
                width,
                height,
                count: frames.len() - missing.len(),
                pixel_format: PixelFormat::Rgb8,
                missing,
            },
            frames,
        })
    }

    pub fn from_frames(fps: u32, frames: Vec<RgbFrame>) -> Result<Self> {
        Self::new(fps, frames.into_iter().map(Some).collect())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let format = self.manifest.pixel_format;
        for (i, frame) in self.frames.iter().enumerate() {
            let Some(frame) = frame else { continue };
            let path = frame_path(dir, i, format);
            let img = RgbImage::from_raw(
                frame.width() as u32,
                frame.height() as u32,
                frame.data().to_vec(),
            )
            .context("frame buffer size")?;
            match format {
                PixelFormat::Rgb8 => img.save_with_format(&path, ImageFormat::Pnm),
                PixelFormat::Gray8 => image::DynamicImage::ImageRgb8(img)
                    .into_luma8()
                    .save_with_format(&path, ImageFormat::Pnm),
            }
            .with_context(|| format!("writing {}", path.display()))?;
        }
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(dir.join(MANIFEST), text + "\n")
            .with_context(|| format!("writing manifest in {}", dir.display()))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let manifest_path = dir.join(MANIFEST);
        let text = fs::read_to_string(&manifest_path)
            .with_context(|| format!("reading {}", manifest_path.display()))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", manifest_path.display()))?;
        ensure!(manifest.fps > 0, "manifest fps must be positive");
        ensure!(manifest.count > 0, "frame store {} is empty", dir.display());
        let slots = manifest.slots();
        let mut frames = vec![None; slots];
        for (i, slot) in frames.iter_mut().enumerate() {
            if manifest.missing.contains(&i) {
                continue;
            }
            let path = frame_path(dir, i, manifest.pixel_format);
            let img = image::open(&path)
                .with_context(|| format!("reading {}", path.display()))?
                .into_rgb8();
            if img.width() as usize != manifest.width || img.height() as usize != manifest.height {
                bail!(
                    "{} is {}x{}, manifest says {}x{}",
                    path.display(),
                    img.width(),
                    img.height(),
                    manifest.width,
                    manifest.height
                );
            }
            *slot = Some(RgbFrame::new(
                manifest.width,
                manifest.height,
                img.into_raw(),
            )?);
        }
        let on_disk = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .filter(|e| {
                e.path()
                    .extension()
                    .is_some_and(|x| x == manifest.pixel_format.extension())
            })
            .count();
        ensure!(
            on_disk == manifest.count,
            "manifest lists {} frames, directory holds {on_disk}",
            manifest.count
        );
        Ok(Self { manifest, frames })
    }

    /// Present frames with their indices.
    pub fn present(&self) -> impl Iterator<Item = (usize, &RgbFrame)> {
        self.frames
            .iter()
            .enumerate()
            .filter_map(|(i, f)| f.as_ref().map(|f| (i, f)))
    }
}
