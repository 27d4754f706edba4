//! Gaussian kernels and the background/foreground scores.
//!
//! Scores are kernel sums over the samples of a [`ProcessModel`], each sample
//! weighted by the label probability it was stored with and the whole sum
//! normalized by the number of frames the model holds (not the number of
//! samples). They are therefore not densities. The posterior is the
//! Bayes-like ratio of the background score to the sum of both scores.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::features::{Appearance, FeatureMode, FeatureVector};
use crate::model::ProcessModel;

/// Diagonal covariance: one positive variance per dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCovariance(Vec<f64>);

impl DiagonalCovariance {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::usage("covariance needs at least one dimension"));
        }
        if let Some(v) = entries.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::usage(format!("variance {v} is not positive")));
        }
        Ok(DiagonalCovariance(entries))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }
}

/// Zero-mean multivariate Gaussian density at `x`.
pub fn gaussian(x: &[f64], sigma: &DiagonalCovariance) -> Result<f64> {
    if x.len() != sigma.dimension() {
        return Err(Error::usage(format!(
            "difference has {} dimensions, covariance has {}",
            x.len(),
            sigma.dimension()
        )));
    }
    let d = x.len() as f64;
    let log_det: f64 = sigma.0.iter().map(|s| s.ln()).sum();
    let mahalanobis: f64 = x.iter().zip(&sigma.0).map(|(xi, s)| xi * xi / s).sum();
    Ok((-0.5 * d * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * mahalanobis).exp())
}

/// An unnormalized kernel score.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Score(pub f64);

impl Score {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Mixing of the constant per-sample contribution into the foreground score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixConfig {
    pub u: f64,
    pub alpha_f: f64,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig { u: 1e-6, alpha_f: 0.5 }
    }
}

impl MixConfig {
    pub fn new(u: f64, alpha_f: f64) -> Result<Self> {
        if !(u > 0.0 && u.is_finite()) {
            return Err(Error::config(format!("u must be positive, got {u}")));
        }
        if !(0.0..=1.0).contains(&alpha_f) {
            return Err(Error::config(format!("alpha_f must lie in [0, 1], got {alpha_f}")));
        }
        Ok(MixConfig { u, alpha_f })
    }
}

/// Color-group variances. LAB splits lightness from the two chroma axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColorVariance {
    Rgb(f64),
    Lab { l: f64, ab: f64 },
}

/// Kernel variances for one process, grouped by feature type. Spatial and
/// color variances are shared by the dimensions of their group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelVariances {
    pub spatial: f64,
    pub color: ColorVariance,
    /// Per-scale SILTP variance, `lab+siltp` mode only.
    pub texture: Option<f64>,
}

impl KernelVariances {
    pub fn rgb(spatial: f64, color: f64) -> Self {
        KernelVariances {
            spatial,
            color: ColorVariance::Rgb(color),
            texture: None,
        }
    }

    pub fn lab_siltp(spatial: f64, l: f64, ab: f64, texture: f64) -> Self {
        KernelVariances {
            spatial,
            color: ColorVariance::Lab { l, ab },
            texture: Some(texture),
        }
    }

    pub fn mode(&self) -> FeatureMode {
        match self.color {
            ColorVariance::Rgb(_) => FeatureMode::Rgb,
            ColorVariance::Lab { .. } => FeatureMode::LabSiltp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let consistent = matches!(
            (self.color, self.texture),
            (ColorVariance::Rgb(_), None) | (ColorVariance::Lab { .. }, Some(_))
        );
        if !consistent {
            return Err(Error::config("texture variance must accompany LAB color variances"));
        }
        self.covariance().map(|_| ())
    }

    /// The full covariance over `(x, y, appearance...)`.
    pub fn covariance(&self) -> Result<DiagonalCovariance> {
        let mut entries = vec![self.spatial, self.spatial];
        match self.color {
            ColorVariance::Rgb(c) => entries.extend([c; 3]),
            ColorVariance::Lab { l, ab } => entries.extend([l, ab, ab]),
        }
        if let Some(t) = self.texture {
            entries.extend([t; 3]);
        }
        DiagonalCovariance::new(entries)
    }
}

/// Spatial window half-width covering four standard deviations.
pub fn window_radius(spatial_variance: f64) -> u32 {
    (4.0 * spatial_variance.sqrt()).ceil() as u32
}

/// Squared appearance differences collapsed into the variance groups:
/// `[primary color, secondary color, texture]`.
///
/// RGB puts all three channels in the primary group. LAB puts `L` in the
/// primary group and `a, b` in the secondary one. Texture is the sum over
/// scales of the squared per-scale Hamming distance between SILTP codes.
pub(crate) fn appearance_distance(mode: FeatureMode, a: &Appearance, b: &Appearance) -> [f64; 3] {
    let d: [f64; 3] = std::array::from_fn(|i| a.color[i] - b.color[i]);
    match mode {
        FeatureMode::Rgb => [d[0] * d[0] + d[1] * d[1] + d[2] * d[2], 0.0, 0.0],
        FeatureMode::LabSiltp => {
            let texture = a
                .texture
                .iter()
                .zip(&b.texture)
                .map(|(p, q)| {
                    let h = f64::from(p.hamming(*q));
                    h * h
                })
                .sum();
            [d[0] * d[0], d[1] * d[1] + d[2] * d[2], texture]
        }
    }
}

/// Kernel variances pre-digested into log-space coefficients.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogKernel {
    spatial_norm: f64,
    spatial_coef: f64,
    appearance_norm: f64,
    appearance_coef: [f64; 3],
}

impl LogKernel {
    pub(crate) fn new(v: &KernelVariances) -> Self {
        let ln2pi = (2.0 * PI).ln();
        let (color_norm, primary, secondary) = match v.color {
            ColorVariance::Rgb(c) => (-1.5 * ln2pi - 1.5 * c.ln(), c, f64::INFINITY),
            ColorVariance::Lab { l, ab } => (-1.5 * ln2pi - 0.5 * l.ln() - ab.ln(), l, ab),
        };
        let (texture_norm, texture) = match v.texture {
            Some(t) => (-1.5 * ln2pi - 1.5 * t.ln(), t),
            None => (0.0, f64::INFINITY),
        };
        LogKernel {
            spatial_norm: -ln2pi - v.spatial.ln(),
            spatial_coef: -0.5 / v.spatial,
            appearance_norm: color_norm + texture_norm,
            appearance_coef: [-0.5 / primary, -0.5 / secondary, -0.5 / texture],
        }
    }

    fn log_spatial(&self, d2: f64) -> f64 {
        self.spatial_norm + self.spatial_coef * d2
    }

    #[cfg(test)]
    fn log_appearance(&self, dist: &[f64; 3]) -> f64 {
        self.appearance_norm
            + self.appearance_coef[0] * dist[0]
            + self.appearance_coef[1] * dist[1]
            + self.appearance_coef[2] * dist[2]
    }
}

/// Adds `Σ G(appearance) · G(spatial) · weight` for every kernel, over the
/// model samples within `window` (Chebyshev distance) of the query.
///
/// The spatial factor is evaluated once per location and the appearance
/// factor once per sample and distinct appearance variance, so candidates
/// sharing a color variance share exponentials. If `spatial_mass` is given it
/// receives `Σ G(spatial)` over all samples (regardless of weight) under the
/// first kernel.
pub(crate) fn weighted_kernel_sums(
    query: &FeatureVector,
    model: &ProcessModel,
    kernels: &[LogKernel],
    window: u32,
    out: &mut [f64],
    mut spatial_mass: Option<&mut f64>,
) {
    debug_assert_eq!(kernels.len(), out.len());
    let mode = model.mode();
    let mut groups: Vec<(f64, [f64; 3])> = Vec::new();
    let group_of: Vec<usize> = kernels
        .iter()
        .map(|k| {
            let key = (k.appearance_norm, k.appearance_coef);
            groups.iter().position(|g| *g == key).unwrap_or_else(|| {
                groups.push(key);
                groups.len() - 1
            })
        })
        .collect();
    let (qx, qy) = (i64::from(query.x), i64::from(query.y));
    let w = i64::from(window);
    let y0 = (qy - w).max(0);
    let y1 = (qy + w).min(i64::from(model.height()) - 1);
    let x0 = (qx - w).max(0);
    let x1 = (qx + w).min(i64::from(model.width()) - 1);
    let mut spatial = vec![0.0f64; kernels.len()];
    let mut appearance = vec![0.0f64; groups.len()];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let samples = model.samples_at(x as u32, y as u32);
            if samples.is_empty() {
                continue;
            }
            let d2 = ((x - qx) * (x - qx) + (y - qy) * (y - qy)) as f64;
            for (s, k) in spatial.iter_mut().zip(kernels) {
                *s = k.log_spatial(d2).exp();
            }
            if let Some(mass) = spatial_mass.as_deref_mut() {
                *mass += samples.len() as f64 * spatial[0];
            }
            for sample in samples {
                if sample.weight <= 0.0 {
                    continue;
                }
                let dist = appearance_distance(mode, &query.appearance, &sample.appearance);
                for (a, (norm, coef)) in appearance.iter_mut().zip(&groups) {
                    let e = norm + coef[0] * dist[0] + coef[1] * dist[1] + coef[2] * dist[2];
                    *a = sample.weight * e.exp();
                }
                for ((acc, s), &g) in out.iter_mut().zip(&spatial).zip(&group_of) {
                    *acc += s * appearance[g];
                }
            }
        }
    }
}

fn check_mode(a: &FeatureVector, model: &ProcessModel, sigma: &KernelVariances) {
    assert_eq!(
        a.mode,
        model.mode(),
        "feature vector and model use different feature modes"
    );
    assert_eq!(a.mode, sigma.mode(), "variances do not match the feature mode");
}

/// Background score `S_B` at `a`: weighted kernel sum over background
/// samples within `window`, divided by `N_B`. Zero for an empty model.
pub fn background_score(a: &FeatureVector, bg: &ProcessModel, sigma: &KernelVariances, window: u32) -> Score {
    check_mode(a, bg, sigma);
    if bg.is_empty() {
        return Score(0.0);
    }
    let mut sum = [0.0];
    weighted_kernel_sums(a, bg, &[LogKernel::new(sigma)], window, &mut sum, None);
    Score(sum[0] / bg.frame_count() as f64)
}

/// The two components of the modified foreground score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForegroundTerms {
    /// Constant contribution `U_F`: `u` per sample, spatially weighted.
    pub uniform: f64,
    /// Color-dependent score `S_F`.
    pub color: f64,
}

impl ForegroundTerms {
    pub fn mix(&self, mix: &MixConfig) -> Score {
        Score(mix.alpha_f * self.uniform + (1.0 - mix.alpha_f) * self.color)
    }
}

/// Computes `U_F` and `S_F`. With no foreground samples at all, `U_F` is
/// floored at `u` so that unexplained colors still read as foreground.
pub fn foreground_terms(
    a: &FeatureVector,
    fg: &ProcessModel,
    sigma: &KernelVariances,
    mix: &MixConfig,
    window: u32,
) -> ForegroundTerms {
    check_mode(a, fg, sigma);
    if fg.is_empty() {
        return ForegroundTerms {
            uniform: mix.u,
            color: 0.0,
        };
    }
    let mut mass = 0.0;
    let mut color = [0.0];
    weighted_kernel_sums(a, fg, &[LogKernel::new(sigma)], window, &mut color, Some(&mut mass));
    let uniform = mix.u * mass;
    let n = fg.frame_count() as f64;
    ForegroundTerms {
        uniform: uniform / n,
        color: color[0] / n,
    }
}

/// Modified foreground score `Ŝ_F = α_F·U_F + (1 − α_F)·S_F`.
pub fn foreground_score(
    a: &FeatureVector,
    fg: &ProcessModel,
    sigma: &KernelVariances,
    mix: &MixConfig,
    window: u32,
) -> Score {
    foreground_terms(a, fg, sigma, mix, window).mix(mix)
}

/// `P(bg|a) = S_B / (S_B + Ŝ_F)`; zero (foreground) when both scores vanish.
pub fn posterior_bg(s_b: Score, s_f_hat: Score) -> f64 {
    let total = s_b.0 + s_f_hat.0;
    if total > 0.0 {
        (s_b.0 / total).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

pub fn posterior_fg(p_bg: f64) -> f64 {
    1.0 - p_bg
}
