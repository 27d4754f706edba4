//! Frames and the feature spaces the kernels operate in.
//!
//! Two feature modes are supported. `rgb` uses the raw color channels.
//! `lab+siltp` uses CIELAB color rescaled to `[0, 255]` per channel, followed
//! by three SILTP texture codes computed at increasing ring radii.

use std::fmt;
use std::str::FromStr;

use image::RgbImage;

use crate::error::{Error, Result};

/// A decoded 3-channel frame with real-valued channels in `[0, 255]`.
///
/// Channels are stored interleaved, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: u32,
    height: u32,
    data: Vec<f64>,
    index: u64,
}

impl Frame {
    pub fn new(width: u32, height: u32, data: Vec<f64>, index: u64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::usage("frame dimensions must be positive"));
        }
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(Error::usage(format!(
                "frame buffer holds {} values, expected {expected}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=255.0).contains(*v)) {
            return Err(Error::usage(format!("channel value {v} outside [0, 255]")));
        }
        Ok(Frame {
            width,
            height,
            data,
            index,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: u32, height: u32, index: u64, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Frame::new(width, height, data, index)
    }

    pub fn uniform(width: u32, height: u32, rgb: [f64; 3], index: u64) -> Result<Self> {
        Frame::from_fn(width, height, index, |_, _| rgb)
    }

    pub fn from_rgb8(image: &RgbImage, index: u64) -> Self {
        let data = image.as_raw().iter().map(|&v| f64::from(v)).collect();
        Frame {
            width: image.width(),
            height: image.height(),
            data,
            index,
        }
    }

    /// Rounds and clamps every channel to 8 bits.
    pub fn to_rgb8(&self) -> RgbImage {
        let raw = self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer size matches dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn with_index(mut self, index: u64) -> Self {
        self.index = index;
        self
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height)
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f64; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Grayscale intensity, the mean of the three channels.
    pub fn intensity(&self, x: u32, y: u32) -> f64 {
        let [r, g, b] = self.pixel(x, y);
        (r + g + b) / 3.0
    }

    pub fn intensity_plane(&self) -> Vec<f64> {
        self.data.chunks_exact(3).map(|p| (p[0] + p[1] + p[2]) / 3.0).collect()
    }

    /// Multiplies every channel by `factor`. Fails if the result leaves `[0, 255]`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let data = self.data.iter().map(|v| v * factor).collect();
        Frame::new(self.width, self.height, data, self.index)
    }

    pub fn same_size(&self, other: &Frame) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Which appearance channels accompany the spatial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FeatureMode {
    #[default]
    Rgb,
    LabSiltp,
}

impl FeatureMode {
    /// Length of a full feature vector, spatial coordinates included.
    pub fn dimension(self) -> usize {
        match self {
            FeatureMode::Rgb => 5,
            FeatureMode::LabSiltp => 8,
        }
    }

    pub fn has_texture(self) -> bool {
        matches!(self, FeatureMode::LabSiltp)
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rgb" => Ok(FeatureMode::Rgb),
            "lab+siltp" => Ok(FeatureMode::LabSiltp),
            other => Err(Error::config(format!(
                "unknown feature mode `{other}` (expected rgb or lab+siltp)"
            ))),
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::Rgb => "rgb",
            FeatureMode::LabSiltp => "lab+siltp",
        })
    }
}

// sRGB primaries to XYZ, D65.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];
const D65_WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];

fn srgb_to_linear(c: f64) -> f64 {
    let c = c / 255.0;
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// CIELAB under D65 in its native units: `L` in `[0, 100]`, `a` and `b`
/// roughly in `[-128, 127]`.
pub fn rgb_to_cielab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let xyz: [f64; 3] =
        std::array::from_fn(|i| SRGB_TO_XYZ[i][0] * lin[0] + SRGB_TO_XYZ[i][1] * lin[1] + SRGB_TO_XYZ[i][2] * lin[2]);
    let fx = lab_f(xyz[0] / D65_WHITE[0]);
    let fy = lab_f(xyz[1] / D65_WHITE[1]);
    let fz = lab_f(xyz[2] / D65_WHITE[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// CIELAB rescaled to `[0, 255]` per channel: `L` is stretched from
/// `[0, 100]`, `a` and `b` are shifted so that zero lands on 128.
pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [l, a, b] = rgb_to_cielab(rgb);
    [
        (l * 255.0 / 100.0).clamp(0.0, 255.0),
        (a + 128.0).clamp(0.0, 255.0),
        (b + 128.0).clamp(0.0, 255.0),
    ]
}

/// Ring neighbors as `(dx, dy)` unit steps, counter-clockwise from east.
/// Neighbor `k` owns bits `2k..2k+2` of a code.
const RING: [(i64, i64); 8] = [(1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1)];

/// Scale-invariant local ternary pattern over the 8-neighbor ring.
///
/// Each neighbor contributes two bits: `01` when brighter than the
/// tolerance band around the center, `10` when darker, `00` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SiltpCode(pub u16);

impl SiltpCode {
    pub const BRIGHTER: u8 = 0b01;
    pub const DARKER: u8 = 0b10;

    pub fn field(self, neighbor: usize) -> u8 {
        ((self.0 >> (2 * neighbor)) & 0b11) as u8
    }

    /// Number of neighbor fields that differ, in `0..=8`.
    pub fn hamming(self, other: SiltpCode) -> u32 {
        (0..8).filter(|&k| self.field(k) != other.field(k)).count() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiltpConfig {
    pub tau: f64,
    pub radii: [u32; 3],
}

impl Default for SiltpConfig {
    fn default() -> Self {
        SiltpConfig {
            tau: 0.05,
            radii: [1, 2, 4],
        }
    }
}

/// Encodes one pixel of a grayscale plane, replicating border pixels.
pub(crate) fn siltp_from_plane(
    plane: &[f64],
    width: u32,
    height: u32,
    x: u32,
    y: u32,
    radius: u32,
    tau: f64,
) -> SiltpCode {
    let at = |px: i64, py: i64| {
        let px = px.clamp(0, i64::from(width) - 1) as usize;
        let py = py.clamp(0, i64::from(height) - 1) as usize;
        plane[py * width as usize + px]
    };
    let center = at(i64::from(x), i64::from(y));
    let upper = (1.0 + tau) * center;
    let lower = (1.0 - tau) * center;
    let r = i64::from(radius);
    let mut code = 0u16;
    for (k, (dx, dy)) in RING.iter().enumerate() {
        let v = at(i64::from(x) + dx * r, i64::from(y) + dy * r);
        let bits = if v > upper {
            SiltpCode::BRIGHTER
        } else if v < lower {
            SiltpCode::DARKER
        } else {
            0
        };
        code |= u16::from(bits) << (2 * k);
    }
    SiltpCode(code)
}

/// SILTP code of the pixel at `(x, y)` on the frame's grayscale intensity.
pub fn siltp_encode(frame: &Frame, x: u32, y: u32, radius: u32, tau: f64) -> Result<SiltpCode> {
    if x >= frame.width() || y >= frame.height() {
        return Err(Error::usage(format!(
            "pixel ({x}, {y}) outside {}x{} frame",
            frame.width(),
            frame.height()
        )));
    }
    if radius < 1 {
        return Err(Error::usage("SILTP radius must be at least 1"));
    }
    if !(tau > 0.0) {
        return Err(Error::usage("SILTP tolerance must be positive"));
    }
    let plane = frame.intensity_plane();
    Ok(siltp_from_plane(
        &plane,
        frame.width(),
        frame.height(),
        x,
        y,
        radius,
        tau,
    ))
}

/// Appearance part of a pixel sample. `texture` is meaningful only in
/// `lab+siltp` mode and left zeroed otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Appearance {
    pub color: [f64; 3],
    pub texture: [SiltpCode; 3],
}

/// A joint domain-range sample: pixel location plus appearance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub x: u32,
    pub y: u32,
    pub mode: FeatureMode,
    pub appearance: Appearance,
}

impl FeatureVector {
    /// Flat component list: `(x, y, c0, c1, c2)` and, in `lab+siltp` mode,
    /// the three raw SILTP codes.
    pub fn components(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mode.dimension());
        out.push(f64::from(self.x));
        out.push(f64::from(self.y));
        out.extend_from_slice(&self.appearance.color);
        if self.mode.has_texture() {
            out.extend(self.appearance.texture.iter().map(|c| f64::from(c.0)));
        }
        out
    }
}

/// Turns frames into per-pixel appearances for one feature mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureExtractor {
    pub mode: FeatureMode,
    pub siltp: SiltpConfig,
}

impl FeatureExtractor {
    pub fn new(mode: FeatureMode, siltp: SiltpConfig) -> Self {
        FeatureExtractor { mode, siltp }
    }

    pub fn extract(&self, frame: &Frame, x: u32, y: u32) -> Result<FeatureVector> {
        if x >= frame.width() || y >= frame.height() {
            return Err(Error::usage(format!(
                "pixel ({x}, {y}) outside {}x{} frame",
                frame.width(),
                frame.height()
            )));
        }
        let plane = match self.mode {
            FeatureMode::Rgb => Vec::new(),
            FeatureMode::LabSiltp => frame.intensity_plane(),
        };
        Ok(FeatureVector {
            x,
            y,
            mode: self.mode,
            appearance: self.appearance_at(frame, &plane, x, y),
        })
    }

    fn appearance_at(&self, frame: &Frame, plane: &[f64], x: u32, y: u32) -> Appearance {
        match self.mode {
            FeatureMode::Rgb => Appearance {
                color: frame.pixel(x, y),
                texture: Default::default(),
            },
            FeatureMode::LabSiltp => Appearance {
                color: rgb_to_lab(frame.pixel(x, y)),
                texture: self
                    .siltp
                    .radii
                    .map(|r| siltp_from_plane(plane, frame.width(), frame.height(), x, y, r, self.siltp.tau)),
            },
        }
    }

    /// Features for every pixel of `frame`.
    pub fn extract_frame(&self, frame: &Frame) -> FeatureFrame {
        let plane = match self.mode {
            FeatureMode::Rgb => Vec::new(),
            FeatureMode::LabSiltp => frame.intensity_plane(),
        };
        let mut appearances = Vec::with_capacity(frame.pixel_count());
        for y in 0..frame.height() {
            for x in 0..frame.width() {
                appearances.push(self.appearance_at(frame, &plane, x, y));
            }
        }
        FeatureFrame {
            width: frame.width(),
            height: frame.height(),
            mode: self.mode,
            index: frame.index(),
            appearances,
        }
    }
}

/// Feature vector of one pixel under the default SILTP settings.
pub fn build_feature_vector(frame: &Frame, x: u32, y: u32, mode: FeatureMode) -> Result<FeatureVector> {
    FeatureExtractor::new(mode, SiltpConfig::default()).extract(frame, x, y)
}

/// Per-pixel appearances of a whole frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    pub width: u32,
    pub height: u32,
    pub mode: FeatureMode,
    pub index: u64,
    pub appearances: Vec<Appearance>,
}

impl FeatureFrame {
    pub fn vector(&self, x: u32, y: u32) -> FeatureVector {
        FeatureVector {
            x,
            y,
            mode: self.mode,
            appearance: self.appearances[y as usize * self.width as usize + x as usize],
        }
    }
}
