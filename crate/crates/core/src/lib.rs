//! Invisible screen-to-camera data links over lightness-modulated video.
//!
//! The transmit side ([`encoder`]) hides QR codes ([`barcode`]) in complementary
//! frame pairs whose temporal mean equals the source video; the modulation
//! depth follows perception ([`colorspace`]) and local texture ([`texture`]).
//! [`channel`] simulates a camera looking at the screen and [`decoder`]
//! recovers the payloads. [`sync`] turns decoded frame indices into audio
//! playback positions.

pub mod barcode;
pub mod channel;
pub mod colorspace;
pub mod decoder;
pub mod encoder;
mod error;
pub mod fixtures;
pub mod geometry;
pub mod sync;
pub mod texture;

pub use error::Error;
