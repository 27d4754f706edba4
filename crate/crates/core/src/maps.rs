//! Per-frame posterior fields and binary masks.

use image::GrayImage;

use crate::error::{Error, Result};

/// Per-pixel `P(bg|a)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMap {
    width: u32,
    height: u32,
    values: Vec<f64>,
}

impl PosteriorMap {
    pub fn new(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        if values.len() != width as usize * height as usize {
            return Err(Error::usage("posterior buffer does not match its dimensions"));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::usage(format!("posterior {v} outside [0, 1]")));
        }
        Ok(PosteriorMap { width, height, values })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.values[y as usize * self.width as usize + x as usize]
    }

    /// Background where `P(bg) > threshold`, foreground otherwise.
    pub fn threshold(&self, threshold: f64) -> LabelMask {
        LabelMask {
            width: self.width,
            height: self.height,
            foreground: self.values.iter().map(|&p| !(p > threshold)).collect(),
        }
    }

    /// 8-bit encoding of the foreground probability, `round(255·P(fg))`.
    pub fn to_luma8(&self) -> GrayImage {
        let raw = self.values.iter().map(|p| (255.0 * (1.0 - p)).round() as u8).collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("buffer size matches dimensions")
    }
}

/// Binary foreground/background labeling, row-major, `true` = foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    width: u32,
    height: u32,
    foreground: Vec<bool>,
}

impl LabelMask {
    pub fn new(width: u32, height: u32, foreground: Vec<bool>) -> Result<Self> {
        if foreground.len() != width as usize * height as usize {
            return Err(Error::usage("mask buffer does not match its dimensions"));
        }
        Ok(LabelMask {
            width,
            height,
            foreground,
        })
    }

    pub fn background(width: u32, height: u32) -> Self {
        LabelMask {
            width,
            height,
            foreground: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut foreground = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                foreground.push(f(x, y));
            }
        }
        LabelMask {
            width,
            height,
            foreground,
        }
    }

    /// Pixels brighter than mid-gray are foreground.
    pub fn from_luma8(image: &GrayImage) -> Self {
        LabelMask {
            width: image.width(),
            height: image.height(),
            foreground: image.as_raw().iter().map(|&v| v > 127).collect(),
        }
    }

    pub fn to_luma8(&self) -> GrayImage {
        let raw = self.foreground.iter().map(|&f| if f { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width, self.height, raw).expect("buffer size matches dimensions")
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_foreground(&self, x: u32, y: u32) -> bool {
        self.foreground[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, foreground: bool) {
        let i = y as usize * self.width as usize + x as usize;
        self.foreground[i] = foreground;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.foreground
    }

    pub fn foreground_count(&self) -> usize {
        self.foreground.iter().filter(|&&f| f).count()
    }

    pub fn same_size(&self, other: &LabelMask) -> bool {
        self.width == other.width && self.height == other.height
    }
}
