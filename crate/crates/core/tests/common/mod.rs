#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use vks::features::{FeatureExtractor, FeatureFrame, FeatureMode, FeatureVector, Frame, SiltpConfig};
use vks::kde::{gaussian, DiagonalCovariance, KernelVariances, MixConfig};
use vks::model::{ModelSample, ProcessModel};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Offset from a model sample at `(x, y)` to the query, in covariance order.
fn difference(a: &FeatureVector, x: u32, y: u32, s: &ModelSample) -> Vec<f64> {
    let mut d = vec![f64::from(a.x) - f64::from(x), f64::from(a.y) - f64::from(y)];
    d.extend((0..3).map(|i| a.appearance.color[i] - s.appearance.color[i]));
    if a.mode == FeatureMode::LabSiltp {
        d.extend(a.appearance.texture.iter().zip(&s.appearance.texture).map(|(p, q)| {
            // Two bits per neighbor: a neighbor differs if either bit does.
            let x = p.0 ^ q.0;
            f64::from(((x | x >> 1) & 0x5555).count_ones())
        }));
    }
    d
}

/// `Σ weight · G(a − sample)` over every sample in the model, no window.
pub fn naive_sum(a: &FeatureVector, model: &ProcessModel, v: &KernelVariances) -> f64 {
    let cov = v.covariance().unwrap();
    let mut total = 0.0;
    for y in 0..model.height() {
        for x in 0..model.width() {
            for s in model.samples_at(x, y) {
                total += s.weight * gaussian(&difference(a, x, y, s), &cov).unwrap();
            }
        }
    }
    total
}

pub fn naive_background(a: &FeatureVector, bg: &ProcessModel, v: &KernelVariances) -> f64 {
    if bg.is_empty() {
        return 0.0;
    }
    naive_sum(a, bg, v) / bg.frame_count() as f64
}

pub fn naive_foreground(a: &FeatureVector, fg: &ProcessModel, v: &KernelVariances, mix: &MixConfig) -> f64 {
    if fg.is_empty() {
        return mix.alpha_f * mix.u;
    }
    let spatial = DiagonalCovariance::new(vec![v.spatial; 2]).unwrap();
    let mut uniform = 0.0;
    for y in 0..fg.height() {
        for x in 0..fg.width() {
            let d = [f64::from(a.x) - f64::from(x), f64::from(a.y) - f64::from(y)];
            uniform += fg.samples_at(x, y).len() as f64 * mix.u * gaussian(&d, &spatial).unwrap();
        }
    }
    let n = fg.frame_count() as f64;
    mix.alpha_f * uniform / n + (1.0 - mix.alpha_f) * naive_sum(a, fg, v) / n
}

/// A block-colored plate with channels in `[40, 215]`.
pub fn random_plate(rng: &mut ChaCha8Rng, width: u32, height: u32, block: u32) -> Frame {
    let bw = width.div_ceil(block);
    let colors: Vec<[f64; 3]> = (0..bw * height.div_ceil(block))
        .map(|_| std::array::from_fn(|_| rng.random_range(40.0..215.0)))
        .collect();
    Frame::from_fn(width, height, 0, |x, y| colors[((y / block) * bw + x / block) as usize]).unwrap()
}

pub fn noisy(rng: &mut ChaCha8Rng, frame: &Frame, std: f64, index: u64) -> Frame {
    let normal = Normal::new(0.0, std).unwrap();
    let data = frame
        .as_slice()
        .iter()
        .map(|v| (v + normal.sample(rng)).clamp(0.0, 255.0))
        .collect();
    Frame::new(frame.width(), frame.height(), data, index).unwrap()
}

pub fn extract(frame: &Frame, mode: FeatureMode) -> FeatureFrame {
    FeatureExtractor::new(mode, SiltpConfig::default()).extract_frame(frame)
}

/// A model filled from `frames`, each sample weighted by `weight()`.
pub fn model_from(frames: &[FeatureFrame], capacity: usize, mut weight: impl FnMut() -> f64) -> ProcessModel {
    let f0 = &frames[0];
    let mut m = ProcessModel::empty(f0.width, f0.height, capacity, f0.mode);
    for f in frames {
        for y in 0..f.height {
            for x in 0..f.width {
                let appearance = f.appearances[(y * f.width + x) as usize];
                m.push(
                    x,
                    y,
                    ModelSample {
                        appearance,
                        weight: weight(),
                        frame: f.index,
                    },
                );
            }
        }
    }
    m
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

/// A random scoring instance: a noisy background model over a random plate,
/// a foreground model mixing scene and random colors with random soft
/// labels, and a query drawn from a fresh noisy frame.
pub struct Instance {
    pub bg: ProcessModel,
    pub fg: ProcessModel,
    pub query: FeatureFrame,
}

pub fn random_instance(rng: &mut ChaCha8Rng, mode: FeatureMode, size: u32) -> Instance {
    let plate = random_plate(rng, size, size, 4);
    let noise = rng.random_range(0.5..4.0);
    let bg_frames: Vec<_> = (0..5).map(|i| extract(&noisy(rng, &plate, noise, i), mode)).collect();
    let fg_frames: Vec<_> = (0..5)
        .map(|i| {
            let mut f = noisy(rng, &plate, noise, 5 + i);
            let (ox, oy) = (rng.random_range(0..size), rng.random_range(0..size));
            let color: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..255.0));
            f = Frame::from_fn(size, size, f.index(), |x, y| {
                if x.abs_diff(ox) < 3 && y.abs_diff(oy) < 3 {
                    color
                } else {
                    f.pixel(x, y)
                }
            })
            .unwrap();
            extract(&f, mode)
        })
        .collect();
    let mut weights = ChaCha8Rng::seed_from_u64(rng.random());
    let bg = model_from(&bg_frames, 5, || weights.random_range(0.5..=1.0));
    let fg = model_from(&fg_frames, 5, || weights.random_range(0.0..=1.0));
    let query = extract(&noisy(rng, &plate, noise, 10), mode);
    Instance { bg, fg, query }
}
