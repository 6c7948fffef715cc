//! Audio synchronization: maps a decoded packet to a playback position.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decoder::PacketResult;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub id: u64,
    pub title: String,
    pub duration_ms: u64,
    /// Display rate of the video carrying the track's codes.
    pub fps_tx: u32,
}

/// Registered tracks keyed by song id.
///
/// The file form is a TOML document with one `[[track]]` table per track:
///
/// ```toml
/// [[track]]
/// id = 1
/// title = "Opening"
/// duration_ms = 180000
/// fps_tx = 60
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackRegistry {
    tracks: BTreeMap<u64, Track>,
}

#[derive(Deserialize, Serialize)]
struct RegistryFile {
    #[serde(default)]
    track: Vec<Track>,
}

impl TrackRegistry {
    pub fn new(tracks: impl IntoIterator<Item = Track>) -> Result<Self, Error> {
        let mut reg = Self::default();
        for t in tracks {
            reg.insert(t)?;
        }
        Ok(reg)
    }

    pub fn insert(&mut self, track: Track) -> Result<(), Error> {
        if track.duration_ms == 0 {
            return Err(Error::InvalidParam("track duration must be positive"));
        }
        if track.fps_tx == 0 {
            return Err(Error::InvalidParam("track fps_tx must be positive"));
        }
        if self.tracks.contains_key(&track.id) {
            return Err(Error::DuplicateTrack(track.id));
        }
        self.tracks.insert(track.id, track);
        Ok(())
    }

    pub fn get(&self, id: u64) -> Option<&Track> {
        self.tracks.get(&id)
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let file: RegistryFile =
            toml::from_str(text).map_err(|e| Error::Registry(e.to_string()))?;
        Self::new(file.track)
    }

    pub fn to_toml_string(&self) -> String {
        let file = RegistryFile {
            track: self.tracks.values().cloned().collect(),
        };
        toml::to_string(&file).expect("registry serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Registry(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

/// Playback time at which code frame `frame_num` starts, in ms. Every code
/// occupies two display frames.
pub fn frame_to_abs_time(frame_num: u64, fps_tx: u32) -> f64 {
    2.0 * frame_num as f64 / fps_tx as f64 * 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaybackPosition {
    pub song_id: u64,
    pub position_ms: f64,
}

/// Where playback should be at time `now_ms` (same clock as the capture
/// timestamps), compensating for the time elapsed since the decoded pair
/// was captured.
pub fn playback_position(
    r: &PacketResult,
    reg: &TrackRegistry,
    now_ms: f64,
) -> Result<PlaybackPosition, Error> {
    let song_id = r.payload.song_id;
    let track = reg.get(song_id).ok_or(Error::UnknownTrack(song_id))?;
    let position_ms =
        frame_to_abs_time(r.payload.frame_num, track.fps_tx) + (now_ms - r.capture_ts_ms);
    if !(0.0..=track.duration_ms as f64).contains(&position_ms) {
        return Err(Error::PositionOutOfRange {
            song_id,
            position_ms,
            duration_ms: track.duration_ms,
        });
    }
    Ok(PlaybackPosition {
        song_id,
        position_ms,
    })
}
