//! Per-pixel selection of background kernel variances.
//!
//! At every pixel the background score is evaluated for each candidate in a
//! small grid of spatial and color variances and the candidate with the
//! highest score is used for classification. Foreground variances stay fixed.
//!
//! The search is the expensive part of classification. [`classify_with_cache`]
//! first retries the variances selected at the same pixel in the previous
//! frame and only searches when the resulting scores are close.

use crate::error::{Error, Result};
use crate::features::{FeatureMode, FeatureVector};
use crate::kde::{
    background_score, foreground_score, posterior_bg, weighted_kernel_sums, window_radius, KernelVariances, LogKernel,
    MixConfig, Score,
};
use crate::model::ProcessModel;

/// Candidate background color variances.
#[derive(Debug, Clone, PartialEq)]
pub enum ColorSet {
    Rgb(Vec<f64>),
    Lab { l: Vec<f64>, ab: Vec<f64> },
}

/// Candidate background variances plus the fixed foreground variances.
///
/// All values are variances, not standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceGrid {
    spatial: Vec<f64>,
    color: ColorSet,
    texture: Option<f64>,
    foreground: KernelVariances,
    candidates: Vec<KernelVariances>,
}

fn sorted_positive(name: &str, mut values: Vec<f64>) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::config(format!("{name} needs at least one candidate")));
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::config(format!("{name} candidate {v} is not positive")));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values)
}

impl VarianceGrid {
    pub fn new(spatial: Vec<f64>, color: ColorSet, texture: Option<f64>, foreground: KernelVariances) -> Result<Self> {
        let spatial = sorted_positive("spatial variance set", spatial)?;
        let color = match color {
            ColorSet::Rgb(c) => ColorSet::Rgb(sorted_positive("rgb variance set", c)?),
            ColorSet::Lab { l, ab } => ColorSet::Lab {
                l: sorted_positive("l variance set", l)?,
                ab: sorted_positive("ab variance set", ab)?,
            },
        };
        let mode = match (&color, texture) {
            (ColorSet::Rgb(_), None) => FeatureMode::Rgb,
            (ColorSet::Lab { .. }, Some(t)) if t.is_finite() && t > 0.0 => FeatureMode::LabSiltp,
            _ => {
                return Err(Error::config(
                    "LAB color sets need a positive SILTP variance and RGB sets none",
                ))
            }
        };
        foreground.validate()?;
        if foreground.mode() != mode {
            return Err(Error::config("foreground variances use a different feature mode"));
        }
        // Spatial-major, then color, each ascending: the first maximum found
        // in this order is the smallest variance pair among ties.
        let mut candidates = Vec::new();
        for &s in &spatial {
            match &color {
                ColorSet::Rgb(cs) => {
                    candidates.extend(cs.iter().map(|&c| KernelVariances::rgb(s, c)));
                }
                ColorSet::Lab { l, ab } => {
                    for &lv in l {
                        for &abv in ab {
                            candidates.push(KernelVariances::lab_siltp(s, lv, abv, texture.unwrap()));
                        }
                    }
                }
            }
        }
        if candidates.len() > u16::MAX as usize {
            return Err(Error::config("variance grid is too large"));
        }
        Ok(VarianceGrid {
            spatial,
            color,
            texture,
            foreground,
            candidates,
        })
    }

    /// Background `σ_d ∈ {0.25, 0.75}`, `σ_rgb ∈ {1.25, 3.75, 11.25}`;
    /// foreground `σ_d = 3`, `σ_rgb = 3.75`.
    pub fn rgb_default() -> Self {
        VarianceGrid::new(
            vec![0.25, 0.75],
            ColorSet::Rgb(vec![1.25, 3.75, 11.25]),
            None,
            KernelVariances::rgb(3.0, 3.75),
        )
        .expect("default grid is valid")
    }

    /// Background `σ_d ∈ {0.25, 0.75}`, `σ_l ∈ {1.25, 2.5, 5}`,
    /// `σ_ab ∈ {1, 1.5}`, `σ_siltp = 0.75`; foreground `σ_d = 3`,
    /// `σ_l = 3.75`, `σ_ab = 1`, `σ_siltp = 0.75`.
    pub fn lab_siltp_default() -> Self {
        VarianceGrid::new(
            vec![0.25, 0.75],
            ColorSet::Lab {
                l: vec![1.25, 2.5, 5.0],
                ab: vec![1.0, 1.5],
            },
            Some(0.75),
            KernelVariances::lab_siltp(3.0, 3.75, 1.0, 0.75),
        )
        .expect("default grid is valid")
    }

    pub fn for_mode(mode: FeatureMode) -> Self {
        match mode {
            FeatureMode::Rgb => VarianceGrid::rgb_default(),
            FeatureMode::LabSiltp => VarianceGrid::lab_siltp_default(),
        }
    }

    /// A grid holding exactly one background candidate.
    pub fn singleton(background: KernelVariances, foreground: KernelVariances) -> Result<Self> {
        let color = match background.color {
            crate::kde::ColorVariance::Rgb(c) => ColorSet::Rgb(vec![c]),
            crate::kde::ColorVariance::Lab { l, ab } => ColorSet::Lab {
                l: vec![l],
                ab: vec![ab],
            },
        };
        VarianceGrid::new(vec![background.spatial], color, background.texture, foreground)
    }

    pub fn mode(&self) -> FeatureMode {
        self.foreground.mode()
    }

    pub fn spatial(&self) -> &[f64] {
        &self.spatial
    }

    pub fn color(&self) -> &ColorSet {
        &self.color
    }

    pub fn texture(&self) -> Option<f64> {
        self.texture
    }

    /// Background candidates in tie-breaking order.
    pub fn candidates(&self) -> &[KernelVariances] {
        &self.candidates
    }

    pub fn foreground(&self) -> &KernelVariances {
        &self.foreground
    }

    /// Background window, sized for the widest spatial candidate.
    pub fn window(&self) -> u32 {
        window_radius(*self.spatial.last().expect("non-empty"))
    }

    pub fn foreground_window(&self) -> u32 {
        window_radius(self.foreground.spatial)
    }
}

/// The winning background candidate at one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    /// Index into [`VarianceGrid::candidates`].
    pub index: usize,
    pub variances: KernelVariances,
    pub score: Score,
}

/// Exhaustive argmax of the background score over the grid, evaluated in a
/// single pass over the samples in [`VarianceGrid::window`].
pub fn select_variances(a: &FeatureVector, bg: &ProcessModel, grid: &VarianceGrid) -> Selection {
    let candidates = grid.candidates();
    let mut scores = vec![0.0; candidates.len()];
    if !bg.is_empty() {
        let kernels: Vec<LogKernel> = candidates.iter().map(LogKernel::new).collect();
        weighted_kernel_sums(a, bg, &kernels, grid.window(), &mut scores, None);
        let n = bg.frame_count() as f64;
        scores.iter_mut().for_each(|s| *s /= n);
    }
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    Selection {
        index: best,
        variances: candidates[best],
        score: Score(scores[best]),
    }
}

/// Ratio of the two scores above which the cached variances are trusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CacheThreshold(f64);

impl CacheThreshold {
    pub fn new(tau_bf: f64) -> Result<Self> {
        if !(tau_bf > 1.0) {
            return Err(Error::config(format!("tau_bf must exceed 1, got {tau_bf}")));
        }
        Ok(CacheThreshold(tau_bf))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when either score exceeds the other by more than the threshold.
    pub fn is_decisive(self, s_b: Score, s_f: Score) -> bool {
        s_b.0 > self.0 * s_f.0 || s_f.0 > self.0 * s_b.0
    }
}

impl Default for CacheThreshold {
    fn default() -> Self {
        CacheThreshold(2.0)
    }
}

/// One pixel's cached background candidate; empty until first searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheEntry(Option<u16>);

impl CacheEntry {
    pub fn get(self) -> Option<usize> {
        self.0.map(usize::from)
    }

    pub fn set(&mut self, index: usize) {
        self.0 = Some(index as u16);
    }

    pub fn invalidate(&mut self) {
        self.0 = None;
    }
}

/// Per-pixel cached background variance choices.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCache {
    width: u32,
    height: u32,
    entries: Vec<CacheEntry>,
}

impl VarianceCache {
    pub fn new(width: u32, height: u32) -> Self {
        VarianceCache {
            width,
            height,
            entries: vec![CacheEntry::default(); width as usize * height as usize],
        }
    }

    pub fn entry(&self, x: u32, y: u32) -> CacheEntry {
        self.entries[y as usize * self.width as usize + x as usize]
    }

    pub fn entry_mut(&mut self, x: u32, y: u32) -> &mut CacheEntry {
        &mut self.entries[y as usize * self.width as usize + x as usize]
    }

    pub fn entries_mut(&mut self) -> &mut [CacheEntry] {
        &mut self.entries
    }

    pub fn invalidate(&mut self) {
        self.entries.fill(CacheEntry::default());
    }

    pub fn is_valid(&self) -> bool {
        self.entries.iter().all(|e| e.0.is_some())
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Outcome of classifying one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub posterior: f64,
    /// Background candidate used, as an index into the grid.
    pub selected: usize,
    pub searched: bool,
}

/// Fixed-variance classification with the grid's first candidate.
pub fn classify_uniform(
    a: &FeatureVector,
    bg: &ProcessModel,
    fg: &ProcessModel,
    mix: &MixConfig,
    grid: &VarianceGrid,
) -> Classification {
    let s_b = background_score(a, bg, &grid.candidates()[0], grid.window());
    let s_f = foreground_score(a, fg, grid.foreground(), mix, grid.foreground_window());
    Classification {
        posterior: posterior_bg(s_b, s_f),
        selected: 0,
        searched: false,
    }
}

/// Classification with a full variance search at this pixel.
pub fn classify_vks(
    a: &FeatureVector,
    bg: &ProcessModel,
    fg: &ProcessModel,
    mix: &MixConfig,
    grid: &VarianceGrid,
) -> Classification {
    let s_f = foreground_score(a, fg, grid.foreground(), mix, grid.foreground_window());
    searched(a, bg, s_f, grid)
}

fn searched(a: &FeatureVector, bg: &ProcessModel, s_f: Score, grid: &VarianceGrid) -> Classification {
    let sel = select_variances(a, bg, grid);
    Classification {
        posterior: posterior_bg(sel.score, s_f),
        selected: sel.index,
        searched: true,
    }
}

/// Classifies with the cached variances when the scores they give are
/// decisive in either direction; otherwise searches the grid and refreshes
/// the cache entry.
pub fn classify_with_cache(
    a: &FeatureVector,
    bg: &ProcessModel,
    fg: &ProcessModel,
    cache: &mut CacheEntry,
    tau: CacheThreshold,
    mix: &MixConfig,
    grid: &VarianceGrid,
) -> Classification {
    let s_f = foreground_score(a, fg, grid.foreground(), mix, grid.foreground_window());
    if let Some(index) = cache.get() {
        let s_b = background_score(a, bg, &grid.candidates()[index], grid.window());
        if tau.is_decisive(s_b, s_f) {
            return Classification {
                posterior: posterior_bg(s_b, s_f),
                selected: index,
                searched: false,
            };
        }
    }
    let out = searched(a, bg, s_f, grid);
    cache.set(out.selected);
    out
}
