//! Background and foreground sample buffers.
//!
//! Each process keeps, per pixel location, a ring of samples taken from
//! previous frames together with the label probability they were stored with.
//! The background ring is only refreshed by pixels the classifier believes
//! are background; the foreground ring always advances.

use crate::error::{Error, Result};
use crate::features::{rgb_to_cielab, Appearance, FeatureFrame, FeatureMode, FeatureVector, Frame};

/// A stored pixel sample. `weight` is `P(bg|·)` in a background model and
/// `P(fg|·)` in a foreground model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelSample {
    pub appearance: Appearance,
    pub weight: f64,
    pub frame: u64,
}

/// Per-location rings of samples for one process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessModel {
    width: u32,
    height: u32,
    capacity: usize,
    mode: FeatureMode,
    samples: Vec<ModelSample>,
    head: Vec<u8>,
    len: Vec<u8>,
    frames: usize,
}

impl ProcessModel {
    pub fn empty(width: u32, height: u32, capacity: usize, mode: FeatureMode) -> Self {
        assert!(
            capacity > 0 && capacity <= u8::MAX as usize,
            "ring capacity out of range"
        );
        let n = width as usize * height as usize;
        ProcessModel {
            width,
            height,
            capacity,
            mode,
            samples: vec![ModelSample::default(); n * capacity],
            head: vec![0; n],
            len: vec![0; n],
            frames: 0,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    /// Number of frames the samples were collected from (`N_B` or `N_F`).
    pub fn frame_count(&self) -> usize {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    /// Samples at a location in storage order.
    pub fn samples_at(&self, x: u32, y: u32) -> &[ModelSample] {
        let p = self.offset(x, y);
        let start = p * self.capacity;
        &self.samples[start..start + self.len[p] as usize]
    }

    /// Samples at a location, oldest first.
    pub fn chronological(&self, x: u32, y: u32) -> Vec<ModelSample> {
        let p = self.offset(x, y);
        let ring = self.samples_at(x, y);
        if ring.len() < self.capacity {
            ring.to_vec()
        } else {
            let head = self.head[p] as usize;
            ring[head..].iter().chain(&ring[..head]).copied().collect()
        }
    }

    /// Appends a sample at `(x, y)`, evicting the oldest one when the ring is full.
    pub fn push(&mut self, x: u32, y: u32, sample: ModelSample) {
        let p = self.offset(x, y);
        let base = p * self.capacity;
        let len = self.len[p] as usize;
        if len < self.capacity {
            self.samples[base + len] = sample;
            self.len[p] += 1;
        } else {
            let head = self.head[p] as usize;
            self.samples[base + head] = sample;
            self.head[p] = ((head + 1) % self.capacity) as u8;
        }
        self.frames = self.frames.max(self.len[p] as usize);
    }

    pub fn clear(&mut self) {
        self.head.fill(0);
        self.len.fill(0);
        self.frames = 0;
    }

    /// Total number of stored samples over all locations.
    pub fn sample_count(&self) -> usize {
        self.len.iter().map(|&l| l as usize).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Frames consumed by initialization.
    pub init_frames: usize,
    /// Background ring length, also the number of initialization frames sampled.
    pub bg_frames: usize,
    /// Foreground ring length.
    pub fg_frames: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            init_frames: 50,
            bg_frames: 5,
            fg_frames: 5,
        }
    }
}

/// Positions sampled from `n` initialization frames: the last frame of each
/// of `m` equal slices. With fewer than `m` frames, all of them.
pub fn init_sample_indices(n: usize, m: usize) -> Vec<usize> {
    if n <= m {
        return (0..n).collect();
    }
    (0..m).map(|k| (k + 1) * n / m - 1).collect()
}

/// Builds a background model from the initialization frames, all treated as
/// background, and an empty foreground model.
pub fn initialize(frames: &[FeatureFrame], cfg: &ModelConfig) -> Result<(ProcessModel, ProcessModel)> {
    let first = frames
        .first()
        .ok_or_else(|| Error::usage("initialization needs at least one frame"))?;
    if frames.len() < cfg.init_frames {
        log::warn!(
            "initializing from {} frames, fewer than the configured {}",
            frames.len(),
            cfg.init_frames
        );
    }
    if frames
        .iter()
        .any(|f| f.width != first.width || f.height != first.height || f.mode != first.mode)
    {
        return Err(Error::usage("initialization frames differ in size or feature mode"));
    }
    let mut bg = ProcessModel::empty(first.width, first.height, cfg.bg_frames, first.mode);
    let fg = ProcessModel::empty(first.width, first.height, cfg.fg_frames, first.mode);
    for i in init_sample_indices(frames.len(), cfg.bg_frames) {
        let frame = &frames[i];
        for y in 0..frame.height {
            for x in 0..frame.width {
                let appearance = frame.appearances[y as usize * frame.width as usize + x as usize];
                bg.push(
                    x,
                    y,
                    ModelSample {
                        appearance,
                        weight: 1.0,
                        frame: frame.index,
                    },
                );
            }
        }
    }
    Ok((bg, fg))
}

/// How the background ring reacts to a newly classified sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackgroundUpdate {
    /// Replace the oldest sample only when `P(bg|a) > 0.5`.
    #[default]
    Conditional,
    /// Always replace the oldest sample. Lets long occlusions corrupt the
    /// background; kept for comparison.
    Always,
}

/// Stores a classified sample with its posterior.
pub fn update(bg: &mut ProcessModel, fg: &mut ProcessModel, a: &FeatureVector, p_bg: f64, frame: u64) {
    update_with(bg, fg, a, p_bg, frame, BackgroundUpdate::Conditional);
}

pub fn update_with(
    bg: &mut ProcessModel,
    fg: &mut ProcessModel,
    a: &FeatureVector,
    p_bg: f64,
    frame: u64,
    policy: BackgroundUpdate,
) {
    debug_assert!((0.0..=1.0).contains(&p_bg));
    if p_bg > 0.5 || policy == BackgroundUpdate::Always {
        bg.push(
            a.x,
            a.y,
            ModelSample {
                appearance: a.appearance,
                weight: p_bg,
                frame,
            },
        );
    }
    fg.push(
        a.x,
        a.y,
        ModelSample {
            appearance: a.appearance,
            weight: 1.0 - p_bg,
            frame,
        },
    );
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResetConfig {
    /// Per-pixel intensity change that counts as an illumination change.
    pub t_i: f64,
    /// Frames used to relearn the background after a reset.
    pub relearn_frames: usize,
}

impl ResetConfig {
    /// Defaults: 10 gray levels in `rgb` mode, 2.5 units of `L*` otherwise.
    pub fn for_mode(mode: FeatureMode) -> Self {
        ResetConfig {
            t_i: match mode {
                FeatureMode::Rgb => 10.0,
                FeatureMode::LabSiltp => 2.5,
            },
            relearn_frames: 50,
        }
    }
}

/// Intensity compared by the reset check: channel mean in `rgb` mode,
/// CIELAB `L*` in `[0, 100]` in `lab+siltp` mode.
pub fn reset_intensity(frame: &Frame, mode: FeatureMode) -> Vec<f64> {
    match mode {
        FeatureMode::Rgb => frame.intensity_plane(),
        FeatureMode::LabSiltp => frame
            .as_slice()
            .chunks_exact(3)
            .map(|p| rgb_to_cielab([p[0], p[1], p[2]])[0])
            .collect(),
    }
}

/// True when strictly more than half of the pixels changed intensity by at
/// least `t_i` between the two frames.
pub fn illumination_reset_check(prev: &Frame, cur: &Frame, cfg: &ResetConfig, mode: FeatureMode) -> Result<bool> {
    if !prev.same_size(cur) {
        return Err(Error::usage(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            cur.width(),
            cur.height()
        )));
    }
    let before = reset_intensity(prev, mode);
    let after = reset_intensity(cur, mode);
    let changed = before
        .iter()
        .zip(&after)
        .filter(|(b, a)| (*a - *b).abs() >= cfg.t_i)
        .count();
    Ok(2 * changed > before.len())
}
