use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("image dimensions must be at least 1x1")]
    EmptyImage,
    #[error("buffer holds {actual} elements, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("lightness outside [0, 100]")]
    LightnessRange,
    #[error("invalid parameter: {0}")]
    InvalidParam(&'static str),
    #[error("window {window} exceeds both image dimensions ({width}x{height})")]
    WindowTooLarge {
        window: usize,
        width: usize,
        height: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("gray level {level} is not below the level count {levels}")]
    LevelRange { level: u16, levels: usize },
    #[error("payload does not fit any barcode version at the requested error correction level")]
    PayloadTooLarge,
    #[error("tile layout of {tiles_w}x{tiles_h} px does not fit a {frame_w}x{frame_h} frame")]
    LayoutOverflow {
        tiles_w: usize,
        tiles_h: usize,
        frame_w: usize,
        frame_h: usize,
    },
    #[error("mode {0:?} cannot be used here")]
    InvalidMode(crate::encoder::Mode),
    #[error("malformed payload string: {0:?}")]
    PayloadFormat(String),
    #[error("expected one payload per source frame ({frames} frames, {payloads} payloads)")]
    PayloadCount { frames: usize, payloads: usize },
    #[error("camera rate {fps_rx} fps is below the display rate {fps_tx} fps")]
    FpsViolation { fps_tx: u32, fps_rx: u32 },
    #[error("at least two captured frames are required")]
    TooFewFrames,
    #[error("song {0} is not registered")]
    UnknownTrack(u64),
    #[error("position {position_ms:.1} ms is outside track {song_id} ({duration_ms} ms)")]
    PositionOutOfRange {
        song_id: u64,
        position_ms: f64,
        duration_ms: u64,
    },
    #[error("duplicate track id {0}")]
    DuplicateTrack(u64),
    #[error("track registry: {0}")]
    Registry(String),
}
