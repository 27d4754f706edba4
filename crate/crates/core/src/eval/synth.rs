//! Deterministic synthetic scenes with exact ground truth.
//!
//! A scene is a random block-colored plate, optionally animated (a jittering
//! sinusoidal band, or a global brightness step), with square objects moving
//! over it and per-channel Gaussian noise on top. Frames are rounded to whole
//! 8-bit levels so that they survive a round trip through image files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::features::Frame;
use crate::maps::LabelMask;

const BLOCK: u32 = 8;
const PLATE_RANGE: (f64, f64) = (70.0, 170.0);

/// How the background changes over time.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneKind {
    Static,
    /// Rows `rows.0..rows.1` carry a sinusoid of the given amplitude and
    /// period (pixels) whose phase jumps by up to `jitter` pixels and whose
    /// strength varies by up to `gain_jitter` (relative) every frame.
    DynamicTexture {
        rows: (u32, u32),
        amplitude: f64,
        period: f64,
        jitter: f64,
        gain_jitter: f64,
    },
    /// Static background; used with a parked object.
    Occlusion,
    /// Every channel of the whole frame shifts by `delta` from `at_frame` on.
    IlluminationJump {
        at_frame: usize,
        delta: f64,
    },
}

/// An object halts at `at_frame` for `duration` frames, then moves on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Park {
    pub at_frame: usize,
    pub duration: usize,
}

/// A constant-color square moving at a constant integer velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingObject {
    pub size: u32,
    pub color: [f64; 3],
    /// Top-left corner on the frame it appears.
    pub start: (i64, i64),
    /// Pixels per frame.
    pub velocity: (i64, i64),
    pub appear: usize,
    pub vanish: Option<usize>,
    pub park: Option<Park>,
}

impl MovingObject {
    pub fn new(size: u32, color: [f64; 3], start: (i64, i64), velocity: (i64, i64), appear: usize) -> Self {
        MovingObject {
            size,
            color,
            start,
            velocity,
            appear,
            vanish: None,
            park: None,
        }
    }

    pub fn visible(&self, frame: usize) -> bool {
        frame >= self.appear && self.vanish.map_or(true, |v| frame < v)
    }

    /// Top-left corner at `frame` (meaningful while visible).
    pub fn position(&self, frame: usize) -> (i64, i64) {
        let elapsed = frame.saturating_sub(self.appear);
        // Stationary on frames `at_frame..at_frame + duration`.
        let steps = match self.park {
            Some(p) if p.duration > 0 && frame >= p.at_frame => {
                let parked = p.at_frame.saturating_sub(self.appear);
                parked + (frame + 1).saturating_sub(p.at_frame + p.duration)
            }
            _ => elapsed,
        } as i64;
        (
            self.start.0 + steps * self.velocity.0,
            self.start.1 + steps * self.velocity.1,
        )
    }

    pub fn covers(&self, frame: usize, x: u32, y: u32) -> bool {
        if !self.visible(frame) {
            return false;
        }
        let (ox, oy) = self.position(frame);
        let s = self.size as i64;
        let (x, y) = (x as i64, y as i64);
        x >= ox && x < ox + s && y >= oy && y < oy + s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SceneKind,
    pub width: u32,
    pub height: u32,
    pub frames: usize,
    pub noise_std: f64,
    pub seed: u64,
    pub objects: Vec<MovingObject>,
}

/// A generated sequence with its noise-free backgrounds and ground truth.
#[derive(Debug, Clone)]
pub struct SynthSequence {
    pub frames: Vec<Frame>,
    /// What each frame would show without objects or noise.
    pub backgrounds: Vec<Frame>,
    pub ground_truth: Vec<LabelMask>,
}

/// Saturated magenta; at least 60 levels from the plate in red.
pub const OBJECT_COLOR: [f64; 3] = [230.0, 40.0, 200.0];

impl SynthSpec {
    pub fn new(kind: SceneKind, width: u32, height: u32, frames: usize, seed: u64) -> Self {
        SynthSpec {
            kind,
            width,
            height,
            frames,
            noise_std: 2.0,
            seed,
            objects: Vec::new(),
        }
    }

    /// 64×64, 100 frames, nothing moves.
    pub fn static_scene(seed: u64) -> Self {
        SynthSpec::new(SceneKind::Static, 64, 64, 100, seed)
    }

    /// 64×64, 150 frames; a waving band across the top 28 rows and one
    /// object crossing it after the initialization window.
    pub fn dynamic_texture(seed: u64) -> Self {
        let kind = SceneKind::DynamicTexture {
            rows: (0, 28),
            amplitude: 35.0,
            period: 10.0,
            jitter: 1.5,
            gain_jitter: 0.2,
        };
        let mut spec = SynthSpec::new(kind, 64, 64, 150, seed);
        spec.objects = vec![
            MovingObject::new(12, OBJECT_COLOR, (-12, 14), (1, 0), 55),
            MovingObject::new(10, [20.0, 220.0, 230.0], (64, 44), (-1, 0), 70),
        ];
        spec
    }

    /// 64×64, 120 frames; a 10×10 square moving 5 px/frame parks for
    /// `park_frames` frames, then drives off.
    pub fn occlusion(seed: u64, park_frames: usize) -> Self {
        let mut spec = SynthSpec::new(SceneKind::Occlusion, 64, 64, 120, seed);
        let mut object = MovingObject::new(10, OBJECT_COLOR, (-10, 27), (5, 0), 50);
        object.park = Some(Park {
            at_frame: 60,
            duration: park_frames,
        });
        spec.objects = vec![object];
        spec
    }

    /// 64×64, 200 frames; brightness rises by 40 at frame 100. One object
    /// crosses before the change and leaves by frame 97; another appears at
    /// frame 150, after the background has been relearned.
    pub fn illumination_jump(seed: u64) -> Self {
        let kind = SceneKind::IlluminationJump {
            at_frame: 100,
            delta: 40.0,
        };
        let mut spec = SynthSpec::new(kind, 64, 64, 200, seed);
        spec.objects = vec![
            MovingObject::new(10, OBJECT_COLOR, (-10, 20), (2, 0), 60),
            MovingObject::new(10, OBJECT_COLOR, (8, 40), (1, 0), 150),
        ];
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 || self.frames == 0 {
            return Err(Error::usage(format!(
                "degenerate scene {}x{} with {} frames",
                self.width, self.height, self.frames
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::usage("noise_std must be finite and non-negative"));
        }
        if self.objects.iter().any(|o| o.size == 0) {
            return Err(Error::usage("object size must be positive"));
        }
        if let SceneKind::DynamicTexture { rows, period, .. } = self.kind {
            if rows.0 >= rows.1 || rows.1 > self.height || !(period > 0.0) {
                return Err(Error::usage("texture band must be non-empty and inside the frame"));
            }
        }
        Ok(())
    }

    pub fn ground_truth(&self, frame: usize) -> LabelMask {
        LabelMask::from_fn(self.width, self.height, |x, y| {
            self.objects.iter().any(|o| o.covers(frame, x, y))
        })
    }
}

pub fn synth_generate(spec: &SynthSpec) -> Result<SynthSequence> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (w, h) = (spec.width, spec.height);

    let bw = w.div_ceil(BLOCK);
    let blocks: Vec<[f64; 3]> = (0..bw * h.div_ceil(BLOCK))
        .map(|_| std::array::from_fn(|_| rng.random_range(PLATE_RANGE.0..=PLATE_RANGE.1).round()))
        .collect();
    let plate = |x: u32, y: u32| blocks[((y / BLOCK) * bw + x / BLOCK) as usize];
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::usage(e.to_string()))?;

    let mut out = SynthSequence {
        frames: Vec::with_capacity(spec.frames),
        backgrounds: Vec::with_capacity(spec.frames),
        ground_truth: Vec::with_capacity(spec.frames),
    };
    for t in 0..spec.frames {
        let (offset, gain) = match spec.kind {
            SceneKind::DynamicTexture {
                jitter, gain_jitter, ..
            } => (
                rng.random_range(-jitter..=jitter),
                1.0 + rng.random_range(-gain_jitter..=gain_jitter),
            ),
            _ => (0.0, 1.0),
        };
        let shift = match spec.kind {
            SceneKind::IlluminationJump { at_frame, delta } if t >= at_frame => delta,
            _ => 0.0,
        };
        let background = Frame::from_fn(w, h, t as u64, |x, y| {
            let mut c = plate(x, y);
            if let SceneKind::DynamicTexture {
                rows,
                amplitude,
                period,
                ..
            } = spec.kind
            {
                if y >= rows.0 && y < rows.1 {
                    let phase = std::f64::consts::TAU * (x as f64 + offset) / period + 0.6 * y as f64;
                    let s = gain * amplitude * phase.sin();
                    c = c.map(|v| v + s);
                }
            }
            c.map(|v| (v + shift).clamp(0.0, 255.0).round())
        })?;
        let gt = spec.ground_truth(t);
        let mut data = Vec::with_capacity(background.as_slice().len());
        for y in 0..h {
            for x in 0..w {
                let base = match spec.objects.iter().find(|o| o.covers(t, x, y)) {
                    Some(o) => o.color.map(|v| (v + shift).clamp(0.0, 255.0)),
                    None => background.pixel(x, y),
                };
                for v in base {
                    let n = if spec.noise_std > 0.0 {
                        noise.sample(&mut rng)
                    } else {
                        0.0
                    };
                    data.push((v + n).clamp(0.0, 255.0).round());
                }
            }
        }
        out.frames.push(Frame::new(w, h, data, t as u64)?);
        out.backgrounds.push(background);
        out.ground_truth.push(gt);
    }
    Ok(out)
}
