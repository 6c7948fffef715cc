//! Payload wire format, QR encode/decode and tiling of codes into frame-sized
//! ternary bit planes.
//!
//! The QR symbology itself is delegated: `qrcodegen` produces the module
//! matrix and `rqrr` locates and reads codes in gray images.

use std::fmt;

use qrcodegen::{QrCode, QrCodeEcc, QrSegment, Version};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::texture::GrayImage;

/// What one code frame carries: a song and the index of the video frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Payload {
    pub song_id: u64,
    pub frame_num: u64,
}

impl Payload {
    pub fn new(song_id: u64, frame_num: u64) -> Self {
        Self { song_id, frame_num }
    }

    /// The transmitted string, `{"s":<song_id>,"f":<frame_num>}`.
    pub fn to_wire(&self) -> String {
        format!("{{\"s\":{},\"f\":{}}}", self.song_id, self.frame_num)
    }

    /// Strict inverse of [`Payload::to_wire`]: no whitespace, fixed key order,
    /// canonical decimal integers.
    pub fn from_wire(s: &str) -> Result<Self, Error> {
        let bad = || Error::PayloadFormat(s.to_string());
        let rest = s.strip_prefix("{\"s\":").ok_or_else(bad)?;
        let (song, rest) = rest.split_once(",\"f\":").ok_or_else(bad)?;
        let frame = rest.strip_suffix('}').ok_or_else(bad)?;
        Ok(Self {
            song_id: parse_canonical(song).ok_or_else(bad)?,
            frame_num: parse_canonical(frame).ok_or_else(bad)?,
        })
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_wire())
    }
}

fn parse_canonical(s: &str) -> Option<u64> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0'))
    {
        return None;
    }
    s.parse().ok()
}

/// Reed-Solomon recovery level of the barcode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EcLevel {
    /// ~7 %
    L,
    /// ~15 %
    M,
    /// ~25 %
    Q,
    /// ~30 %
    H,
}

impl EcLevel {
    pub const ALL: [EcLevel; 4] = [EcLevel::L, EcLevel::M, EcLevel::Q, EcLevel::H];

    fn ordinal(self) -> usize {
        match self {
            EcLevel::L => 0,
            EcLevel::M => 1,
            EcLevel::Q => 2,
            EcLevel::H => 3,
        }
    }

    fn to_qr(self) -> QrCodeEcc {
        match self {
            EcLevel::L => QrCodeEcc::Low,
            EcLevel::M => QrCodeEcc::Medium,
            EcLevel::Q => QrCodeEcc::Quartile,
            EcLevel::H => QrCodeEcc::High,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EcLevel::L => "L",
            EcLevel::M => "M",
            EcLevel::Q => "Q",
            EcLevel::H => "H",
        }
    }

    /// Codeword errors that every RS block of `version` is guaranteed to
    /// correct, excluding the misdecode-protection codewords of the small
    /// symbols. Known for versions 1 to 10.
    pub fn correctable_codewords(self, version: u8) -> Option<usize> {
        // Versions 1..=10.
        const ECC_PER_BLOCK: [[usize; 10]; 4] = [
            [7, 10, 15, 20, 26, 18, 20, 24, 30, 18],
            [10, 16, 26, 18, 24, 16, 18, 22, 22, 26],
            [13, 22, 18, 26, 18, 24, 18, 22, 20, 24],
            [17, 28, 22, 16, 22, 28, 26, 26, 24, 28],
        ];
        if !(1..=10).contains(&version) {
            return None;
        }
        let ecc = ECC_PER_BLOCK[self.ordinal()][version as usize - 1];
        let protection = match (version, self) {
            (1, EcLevel::L) => 3,
            (1, EcLevel::M) | (2, EcLevel::L) => 2,
            (1, _) | (3, EcLevel::L) => 1,
            _ => 0,
        };
        Some((ecc - protection) / 2)
    }
}

impl std::str::FromStr for EcLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "L" | "l" => Ok(EcLevel::L),
            "M" | "m" => Ok(EcLevel::M),
            "Q" | "q" => Ok(EcLevel::Q),
            "H" | "h" => Ok(EcLevel::H),
            _ => Err(Error::InvalidParam("ec level must be one of L, M, Q, H")),
        }
    }
}

/// Square QR module grid; `true` is a dark module.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModuleMatrix {
    pub size: usize,
    pub version: u8,
    pub dark: Vec<bool>,
}

impl ModuleMatrix {
    #[inline]
    pub fn is_dark(&self, x: usize, y: usize) -> bool {
        self.dark[y * self.size + x]
    }

    /// Centers of the alignment patterns along one axis.
    pub fn alignment_positions(&self) -> Vec<usize> {
        alignment_centers(self.version)
    }

    /// True for modules that do not carry codewords: finder patterns with
    /// separators and format information, timing lines, alignment patterns
    /// and version information.
    pub fn is_function_module(&self, x: usize, y: usize) -> bool {
        let n = self.size;
        if (x < 9 && y < 9) || (x + 8 >= n && y < 9) || (x < 9 && y + 8 >= n) || x == 6 || y == 6 {
            return true;
        }
        if self.version >= 7
            && ((x < 6 && y + 11 >= n && y + 8 < n) || (y < 6 && x + 11 >= n && x + 8 < n))
        {
            return true;
        }
        let centers = self.alignment_positions();
        let last = centers.len().saturating_sub(1);
        for (i, &cy) in centers.iter().enumerate() {
            for (j, &cx) in centers.iter().enumerate() {
                let on_finder =
                    (i == 0 && j == 0) || (i == 0 && j == last) || (i == last && j == 0);
                if !on_finder && x.abs_diff(cx) <= 2 && y.abs_diff(cy) <= 2 {
                    return true;
                }
            }
        }
        false
    }
}

/// Centers of the alignment patterns of `version` along one axis.
pub fn alignment_centers(version: u8) -> Vec<usize> {
    let ver = version as usize;
    if ver <= 1 {
        return Vec::new();
    }
    let size = ver * 4 + 17;
    let count = ver / 7 + 2;
    let step = if ver == 32 {
        26
    } else {
        (ver * 4 + count * 2 + 1) / (count * 2 - 2) * 2
    };
    let mut pos: Vec<usize> = (0..count - 1).map(|i| size - 7 - i * step).collect();
    pos.push(6);
    pos.reverse();
    pos
}

/// Encodes the payload at the smallest QR version that fits. The level is
/// taken as given; it is never boosted.
pub fn encode_payload(p: &Payload, ec: EcLevel) -> Result<ModuleMatrix, Error> {
    encode_text(&p.to_wire(), ec)
}

pub fn encode_text(text: &str, ec: EcLevel) -> Result<ModuleMatrix, Error> {
    let segs = QrSegment::make_segments(text);
    let qr = QrCode::encode_segments_advanced(
        &segs,
        ec.to_qr(),
        Version::MIN,
        Version::MAX,
        None,
        false,
    )
    .map_err(|_| Error::PayloadTooLarge)?;
    let size = qr.size() as usize;
    let mut dark = Vec::with_capacity(size * size);
    for y in 0..size as i32 {
        for x in 0..size as i32 {
            dark.push(qr.get_module(x, y));
        }
    }
    Ok(ModuleMatrix {
        size,
        version: qr.version().value(),
        dark,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn right(&self) -> usize {
        self.x + self.w
    }

    pub fn bottom(&self) -> usize {
        self.y + self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    /// Smallest rectangle covering both.
    pub fn union(&self, other: &Rect) -> Rect {
        let x = self.x.min(other.x);
        let y = self.y.min(other.y);
        Rect {
            x,
            y,
            w: self.right().max(other.right()) - x,
            h: self.bottom().max(other.bottom()) - y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileLayout {
    /// 1 (centered) or 6 (2 rows x 3 columns).
    pub count: usize,
    pub module_px: usize,
    pub quiet_zone: usize,
}

impl Default for TileLayout {
    fn default() -> Self {
        Self {
            count: 1,
            module_px: 4,
            quiet_zone: 4,
        }
    }
}

impl TileLayout {
    pub fn single() -> Self {
        Self::default()
    }

    pub fn six() -> Self {
        Self {
            count: 6,
            ..Self::default()
        }
    }

    pub fn grid(&self) -> Result<(usize, usize), Error> {
        match self.count {
            1 => Ok((1, 1)),
            6 => Ok((2, 3)),
            _ => Err(Error::InvalidParam("tile count must be 1 or 6")),
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.grid()?;
        if self.module_px == 0 {
            return Err(Error::InvalidParam("module_px must be at least 1"));
        }
        Ok(())
    }

    /// Side length in pixels of one tile, quiet zone included.
    pub fn tile_px(&self, matrix_size: usize) -> usize {
        (matrix_size + 2 * self.quiet_zone) * self.module_px
    }

    /// Tile placements for a code of `matrix_size` modules. Tiles are centered
    /// in the cells of an even grid over the frame.
    pub fn tile_rects(
        &self,
        matrix_size: usize,
        frame_w: usize,
        frame_h: usize,
    ) -> Result<Vec<Rect>, Error> {
        self.validate()?;
        let (rows, cols) = self.grid()?;
        let side = self.tile_px(matrix_size);
        let (cell_w, cell_h) = (frame_w / cols, frame_h / rows);
        if side > cell_w || side > cell_h {
            return Err(Error::LayoutOverflow {
                tiles_w: side * cols,
                tiles_h: side * rows,
                frame_w,
                frame_h,
            });
        }
        let mut rects = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                rects.push(Rect {
                    x: c * cell_w + (cell_w - side) / 2,
                    y: r * cell_h + (cell_h - side) / 2,
                    w: side,
                    h: side,
                });
            }
        }
        Ok(rects)
    }
}

/// Frame-sized ternary code layout: `+1` light module, `-1` dark module,
/// `0` unmodulated background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    pub width: usize,
    pub height: usize,
    pub s: Vec<i8>,
    pub tiles: Vec<Rect>,
}

impl BitPlane {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i8 {
        self.s[y * self.width + x]
    }

    /// Bounding box of the nonzero pixels.
    pub fn bbox(&self) -> Option<Rect> {
        self.tiles.iter().copied().reduce(|a, b| a.union(&b))
    }

    /// Reads the plane as a gray image: light 100, dark and background 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self
                .s
                .iter()
                .map(|&v| if v > 0 { 100.0 } else { 0.0 })
                .collect(),
        }
    }
}

pub fn render_tiles(
    m: &ModuleMatrix,
    frame_w: usize,
    frame_h: usize,
    layout: &TileLayout,
) -> Result<BitPlane, Error> {
    let rects = layout.tile_rects(m.size, frame_w, frame_h)?;
    let mut s = vec![0i8; frame_w * frame_h];
    let px = layout.module_px;
    let qz = layout.quiet_zone as isize;
    for rect in &rects {
        for ty in 0..rect.h {
            let my = (ty / px) as isize - qz;
            let row = &mut s[(rect.y + ty) * frame_w..(rect.y + ty + 1) * frame_w];
            for tx in 0..rect.w {
                let mx = (tx / px) as isize - qz;
                let inside = mx >= 0 && my >= 0 && (mx as usize) < m.size && (my as usize) < m.size;
                let dark = inside && m.is_dark(mx as usize, my as usize);
                row[rect.x + tx] = if dark { -1 } else { 1 };
            }
        }
    }
    Ok(BitPlane {
        width: frame_w,
        height: frame_h,
        s,
        tiles: rects,
    })
}

/// Why no payload came out of an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecodeFailure {
    /// No finder-pattern triple was located.
    NoCode,
    /// A code was located but failed its checksums.
    Corrupt,
    /// The code decoded to text that is not a payload.
    ForeignContent,
}

/// Finds and reads codes in a lightness image (light near 100, dark near 0).
/// Every located code is tried; the first payload that decodes wins.
pub fn decode_matrix(img: &GrayImage) -> Result<Payload, DecodeFailure> {
    let mut prepared =
        rqrr::PreparedImage::prepare_from_greyscale(img.width, img.height, |x, y| {
            (img.get(x, y) * 2.55).round().clamp(0.0, 255.0) as u8
        });
    let grids = prepared.detect_grids();
    if grids.is_empty() {
        return Err(DecodeFailure::NoCode);
    }
    let mut failure = DecodeFailure::Corrupt;
    for grid in grids {
        match grid.decode() {
            Ok((_, text)) => match Payload::from_wire(&text) {
                Ok(p) => return Ok(p),
                Err(_) => failure = DecodeFailure::ForeignContent,
            },
            Err(_) => {
                if let Some(text) = resample(img, &grid.bounds, rqrr::BitGrid::size(&grid.grid)) {
                    match Payload::from_wire(&text) {
                        Ok(p) => return Ok(p),
                        Err(_) => failure = DecodeFailure::ForeignContent,
                    }
                }
            }
        }
    }
    Err(failure)
}

/// Modules whose colour is fixed for every code of side `n`: finder
/// patterns with their separators, timing lines and alignment patterns.
fn fixed_modules(n: usize) -> Vec<(usize, usize, bool)> {
    let mut out = Vec::new();
    for (ox, oy) in [(0, 0), (n - 7, 0), (0, n - 7)] {
        for dy in -1i64..=7 {
            for dx in -1i64..=7 {
                let (x, y) = (ox as i64 + dx, oy as i64 + dy);
                if x < 0 || y < 0 || x >= n as i64 || y >= n as i64 {
                    continue;
                }
                let ring = (dx - 3).abs().max((dy - 3).abs());
                out.push((x as usize, y as usize, ring <= 1 || ring == 3));
            }
        }
    }
    for i in 8..n - 8 {
        out.push((i, 6, i % 2 == 0));
        out.push((6, i, i % 2 == 0));
    }
    let centers = alignment_centers(((n - 17) / 4) as u8);
    let last = centers.len().saturating_sub(1);
    for (i, &cy) in centers.iter().enumerate() {
        for (j, &cx) in centers.iter().enumerate() {
            if (i == 0 && j == 0) || (i == 0 && j == last) || (i == last && j == 0) {
                continue;
            }
            for y in cy - 2..=cy + 2 {
                for x in cx - 2..=cx + 2 {
                    let ring = x.abs_diff(cx).max(y.abs_diff(cy));
                    out.push((x, y, ring != 1));
                }
            }
        }
    }
    out
}

/// Bilinear map from module coordinates of an `n`-module code onto the
/// quadrilateral `q` (top-left, top-right, bottom-right, bottom-left).
struct Quad {
    q: [(f64, f64); 4],
    n: f64,
}

impl Quad {
    fn map(&self, u: f64, v: f64) -> (f64, f64) {
        let (u, v) = (u / self.n, v / self.n);
        let [a, b, c, d] = self.q;
        let top = (a.0 + (b.0 - a.0) * u, a.1 + (b.1 - a.1) * u);
        let bottom = (d.0 + (c.0 - d.0) * u, d.1 + (c.1 - d.1) * u);
        (
            top.0 + (bottom.0 - top.0) * v,
            top.1 + (bottom.1 - top.1) * v,
        )
    }

    /// Dark votes minus light votes over nine points of module (x, y).
    fn vote(&self, img: &GrayImage, x: usize, y: usize) -> i32 {
        const OFFSETS: [f64; 3] = [0.3, 0.5, 0.7];
        let mut score = 0;
        for dv in OFFSETS {
            for du in OFFSETS {
                let (px, py) = self.map(x as f64 + du, y as f64 + dv);
                let (px, py) = (px.floor(), py.floor());
                if px < 0.0 || py < 0.0 || px as usize >= img.width || py as usize >= img.height {
                    continue;
                }
                score += if img.get(px as usize, py as usize) < 50.0 {
                    1
                } else {
                    -1
                };
            }
        }
        score
    }

    fn fitness(&self, img: &GrayImage, fixed: &[(usize, usize, bool)]) -> i32 {
        fixed
            .iter()
            .map(|&(x, y, dark)| {
                if dark {
                    self.vote(img, x, y)
                } else {
                    -self.vote(img, x, y)
                }
            })
            .sum()
    }
}

/// Coordinate descent on the corners of `quad`. With `affine` the
/// bottom-right corner follows the other three, which is all the fixed
/// patterns of a version 1 code can pin down.
fn refine(
    img: &GrayImage,
    fixed: &[(usize, usize, bool)],
    mut quad: Quad,
    affine: bool,
) -> (Quad, i32) {
    let complete = |mut q: [(f64, f64); 4]| {
        if affine {
            q[2] = (q[1].0 + q[3].0 - q[0].0, q[1].1 + q[3].1 - q[0].1);
        }
        q
    };
    quad.q = complete(quad.q);
    let mut fit = quad.fitness(img, fixed);
    for step in [2.0, 1.0, 0.5, 0.25] {
        let mut improved = true;
        while improved {
            improved = false;
            for k in 0..8 {
                if affine && k / 2 == 2 {
                    continue;
                }
                for sign in [-1.0, 1.0] {
                    let mut q = quad.q;
                    let c = &mut q[k / 2];
                    if k % 2 == 0 {
                        c.0 += sign * step
                    } else {
                        c.1 += sign * step
                    }
                    let cand = Quad {
                        q: complete(q),
                        n: quad.n,
                    };
                    let f = cand.fitness(img, fixed);
                    if f > fit {
                        (quad, fit, improved) = (cand, f, true);
                    }
                }
            }
        }
    }
    (quad, fit)
}

/// Second reading of a grid whose first decode failed: the corners are
/// refitted against the fixed patterns and every module is read by a
/// nine-point vote. Neighbouring sizes are tried too.
fn resample(img: &GrayImage, bounds: &[rqrr::Point; 4], size: usize) -> Option<String> {
    let start = bounds.map(|p| (p.x as f64, p.y as f64));
    for n in [size, size + 4, size.saturating_sub(4)] {
        if !(21..=177).contains(&n) {
            continue;
        }
        let fixed = fixed_modules(n);
        let (mut quad, _) = refine(
            img,
            &fixed,
            Quad {
                q: start,
                n: n as f64,
            },
            true,
        );
        if n > 21 {
            quad = refine(img, &fixed, quad, false).0;
        }
        let grid = rqrr::SimpleGrid::from_func(n, |x, y| quad.vote(img, x, y) > 0);
        if let Ok((_, text)) = rqrr::Grid::new(grid).decode() {
            return Some(text);
        }
    }
    None
}
