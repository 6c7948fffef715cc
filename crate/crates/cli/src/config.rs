//! TOML configuration for the subcommands and evaluation recipes.
//!
//! Every section is optional and falls back to the library defaults.

use std::path::Path;

use ambilink_core::barcode::{EcLevel, TileLayout};
use ambilink_core::channel::{ChannelParams, Jitter};
use ambilink_core::colorspace::PerceptionParams;
use ambilink_core::decoder::DecoderConfig;
use ambilink_core::encoder::{Mode, ModulationParams};
use ambilink_core::sync::Track;
use ambilink_core::texture::TextureParams;
use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulationConfig {
    pub delta_e00: f64,
    pub k_l: f64,
    pub window: usize,
    pub k: f64,
    pub ng: usize,
    pub tiles: usize,
    pub module_px: usize,
    pub quiet_zone: usize,
    pub ec_level: EcLevel,
    pub smoothing_sigma: f64,
    pub mode: Mode,
    pub fps_tx: u32,
}

impl Default for ModulationConfig {
    fn default() -> Self {
        let mp = ModulationParams::default();
        Self {
            delta_e00: mp.perception.delta_e00,
            k_l: mp.perception.k_l,
            window: mp.texture.window,
            k: mp.texture.k,
            ng: mp.texture.ng,
            tiles: mp.layout.count,
            module_px: mp.layout.module_px,
            quiet_zone: mp.layout.quiet_zone,
            ec_level: mp.ec,
            smoothing_sigma: mp.smoothing_sigma,
            mode: mp.mode,
            fps_tx: mp.fps_tx,
        }
    }
}

impl ModulationConfig {
    pub fn params(&self) -> Result<ModulationParams> {
        let mp = ModulationParams {
            perception: PerceptionParams::new(self.delta_e00, self.k_l)?,
            texture: TextureParams {
                window: self.window,
                k: self.k,
                ng: self.ng,
            },
            layout: TileLayout {
                count: self.tiles,
                module_px: self.module_px,
                quiet_zone: self.quiet_zone,
            },
            ec: self.ec_level,
            smoothing_sigma: self.smoothing_sigma,
            mode: self.mode,
            fps_tx: self.fps_tx,
        };
        mp.validate()?;
        Ok(mp)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PayloadConfig {
    pub song_id: u64,
    /// Frame number carried by the first code frame.
    pub first_frame: u64,
}

impl Default for PayloadConfig {
    fn default() -> Self {
        Self {
            song_id: 1,
            first_frame: 0,
        }
    }
}

/// Values replacing those of the selected preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelOverrides {
    pub gain: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub drop_prob: Option<f64>,
    pub shutter_band: Option<f64>,
    pub occlusion_prob: Option<f64>,
    pub jitter: Option<Jitter>,
}

impl ChannelOverrides {
    pub fn apply(&self, cp: &mut ChannelParams) {
        if let Some(v) = self.gain {
            cp.gain = v;
        }
        if let Some(v) = self.noise_sigma {
            cp.noise_sigma = v;
        }
        if let Some(v) = self.drop_prob {
            cp.drop_prob = v;
        }
        if let Some(v) = self.shutter_band {
            cp.shutter_band = v;
        }
        if let Some(v) = self.occlusion_prob {
            cp.occlusion_prob = v;
        }
        if let Some(j) = self.jitter {
            cp.jitter = Some(j);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub preset: String,
    pub fps_rx: u32,
    #[serde(flatten)]
    pub overrides: ChannelOverrides,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            preset: "ideal".into(),
            fps_rx: 60,
            overrides: ChannelOverrides::default(),
        }
    }
}

pub fn channel_params(
    preset: &str,
    fps_rx: u32,
    overrides: &ChannelOverrides,
    seed: u64,
) -> Result<ChannelParams> {
    let Some(mut cp) = ChannelParams::preset(preset, fps_rx) else {
        bail!(
            "unknown channel preset {preset:?}; expected one of {}",
            ambilink_core::channel::PRESETS.join(", ")
        );
    };
    overrides.apply(&mut cp);
    cp.seed = seed;
    cp.validate()?;
    Ok(cp)
}

impl ChannelConfig {
    pub fn params(&self, seed: u64) -> Result<ChannelParams> {
        channel_params(&self.preset, self.fps_rx, &self.overrides, seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecoderSection {
    pub roi_threshold: f64,
    pub min_region_px: usize,
    pub resync_failures: u32,
    pub motion_comp: bool,
    /// Deconvolution width; defaults to the transmit smoothing width.
    pub sharpen_sigma: Option<f64>,
    pub denoise_sigma: f64,
}

impl Default for DecoderSection {
    fn default() -> Self {
        let d = DecoderConfig::default();
        Self {
            roi_threshold: d.roi_threshold,
            min_region_px: d.min_region_px,
            resync_failures: d.resync_failures,
            motion_comp: d.motion_comp,
            sharpen_sigma: None,
            denoise_sigma: d.denoise_sigma,
        }
    }
}

impl DecoderSection {
    pub fn config(
        &self,
        mode: Mode,
        smoothing_sigma: f64,
        motion_comp: bool,
    ) -> Result<DecoderConfig> {
        let cfg = DecoderConfig {
            roi_threshold: self.roi_threshold,
            min_region_px: self.min_region_px,
            resync_failures: self.resync_failures,
            motion_comp,
            mode,
            sharpen_sigma: self.sharpen_sigma.unwrap_or(smoothing_sigma),
            denoise_sigma: self.denoise_sigma,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Configuration shared by `encode`, `simulate`, `decode` and `sync-demo`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub modulation: ModulationConfig,
    pub payload: PayloadConfig,
    pub channel: ChannelConfig,
    pub decoder: DecoderSection,
    pub demo: DemoConfig,
    pub track: Vec<Track>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub packets: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            packets: 30,
            width: 160,
            height: 160,
        }
    }
}

/// Parameter grid of an evaluation; conditions are its cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub delta_e00: Vec<f64>,
    pub tiles: Vec<usize>,
    pub ec_level: Vec<EcLevel>,
    pub mode: Vec<Mode>,
    pub gaussian: Vec<bool>,
    pub motion_comp: Vec<bool>,
    pub channel_preset: Vec<String>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            delta_e00: vec![2.0],
            tiles: vec![1],
            ec_level: vec![EcLevel::L],
            mode: vec![Mode::Pair],
            gaussian: vec![true],
            motion_comp: vec![false],
            channel_preset: vec!["ideal".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub trials: usize,
    /// Code frames per trial.
    pub packets: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub song_id: u64,
    pub fps_tx: u32,
    pub fps_rx: u32,
    /// Smoothing width used by conditions with `gaussian = true`.
    pub smoothing_sigma: f64,
    pub k_l: f64,
    pub texture: TextureParams,
    pub module_px: usize,
    pub quiet_zone: usize,
    pub grid: Grid,
    pub channel: ChannelOverrides,
    pub decoder: DecoderSection,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        let mp = ModulationParams::default();
        Self {
            name: "experiment".into(),
            trials: 1,
            packets: 50,
            seed: 0,
            width: 192,
            height: 192,
            song_id: 1,
            fps_tx: mp.fps_tx,
            fps_rx: mp.fps_tx,
            smoothing_sigma: mp.smoothing_sigma,
            k_l: mp.perception.k_l,
            texture: mp.texture,
            module_px: mp.layout.module_px,
            quiet_zone: mp.layout.quiet_zone,
            grid: Grid::default(),
            channel: ChannelOverrides::default(),
            decoder: DecoderSection::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(self.packets >= 1, "packets must be at least 1");
        ensure!(
            self.width > 0 && self.height > 0,
            "frame size must be positive"
        );
        let g = &self.grid;
        ensure!(
            !(g.delta_e00.is_empty()
                || g.tiles.is_empty()
                || g.ec_level.is_empty()
                || g.mode.is_empty()
                || g.gaussian.is_empty()
                || g.motion_comp.is_empty()
                || g.channel_preset.is_empty()),
            "every grid axis needs at least one value"
        );
        for p in &g.channel_preset {
            channel_params(p, self.fps_rx, &self.channel, 0)?;
        }
        self.texture.validate()?;
        self.decoder
            .config(Mode::Pair, self.smoothing_sigma, false)?;
        Ok(())
    }
}

pub fn load_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        assert_eq!(c.modulation.params().unwrap(), ModulationParams::default());
        assert_eq!(c.channel.params(0).unwrap(), ChannelParams::ideal(60));
    }

    #[test]
    fn overrides_replace_preset_values() {
        let c: RunConfig = toml::from_str(
            "[channel]\npreset = \"iso100-s180\"\nnoise_sigma = 0.25\njitter = { translation_px = 2.0, rotation_deg = 0.5, scale = 0.0 }\n",
        )
        .unwrap();
        let cp = c.channel.params(9).unwrap();
        assert_eq!((cp.gain, cp.noise_sigma, cp.seed), (0.8, 0.25, 9));
        assert_eq!(cp.jitter.unwrap().translation_px, 2.0);
    }

    #[test]
    fn unknown_keys_and_presets_fail() {
        assert!(toml::from_str::<RunConfig>("[modulation]\ndelta = 1.0\n").is_err());
        let c: RunConfig = toml::from_str("[channel]\npreset = \"iso800\"\n").unwrap();
        assert!(c.channel.params(0).is_err());
    }

    #[test]
    fn experiment_validation() {
        let mut s = ExperimentSpec::default();
        s.validate().unwrap();
        s.grid.tiles.clear();
        assert!(s.validate().is_err());
        let s = ExperimentSpec {
            trials: 0,
            ..ExperimentSpec::default()
        };
        assert!(s.validate().is_err());
    }
}
