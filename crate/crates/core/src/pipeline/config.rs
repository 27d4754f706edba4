//! Pipeline configuration and its flat `key = value` file format.
//!
//! One key per line, `#` starts a comment, lists are comma-separated.
//! Variance keys take variances, not standard deviations. Keys not present
//! keep their defaults; the variance keys default according to
//! `feature_mode`.
//!
//! ```text
//! feature_mode = rgb
//! variance_mode = vks-cached
//! bg_sigma_d = 0.25, 0.75
//! bg_sigma_rgb = 1.25, 3.75, 11.25
//! tau_bf = 2
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{FeatureMode, SiltpConfig};
use crate::kde::{ColorVariance, KernelVariances, MixConfig};
use crate::model::{BackgroundUpdate, ModelConfig, ResetConfig};
use crate::mrf::MrfConfig;
use crate::variance::{CacheThreshold, ColorSet, VarianceGrid};

/// How background variances are chosen per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum VarianceMode {
    /// The grid's first candidate everywhere.
    Uniform,
    /// Full search at every pixel.
    Vks,
    /// Search only where the previous frame's choice is not decisive.
    #[default]
    VksCached,
}

impl FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "uniform" => Ok(VarianceMode::Uniform),
            "vks" => Ok(VarianceMode::Vks),
            "vks-cached" => Ok(VarianceMode::VksCached),
            other => Err(Error::config(format!(
                "unknown variance mode `{other}` (expected uniform, vks or vks-cached)"
            ))),
        }
    }
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceMode::Uniform => "uniform",
            VarianceMode::Vks => "vks",
            VarianceMode::VksCached => "vks-cached",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub feature_mode: FeatureMode,
    pub variance_mode: VarianceMode,
    pub grid: VarianceGrid,
    pub siltp: SiltpConfig,
    pub mix: MixConfig,
    pub tau_bf: CacheThreshold,
    pub mrf: MrfConfig,
    pub min_component_size: usize,
    pub posterior_threshold: f64,
    pub model: ModelConfig,
    pub background_update: BackgroundUpdate,
    /// `None` disables illumination resets.
    pub reset: Option<ResetConfig>,
    /// Worker threads; `None` defers to `BGSUB_THREADS`, then to rayon's default.
    pub threads: Option<usize>,
}

/// Splits configuration text into `(key, value)` pairs, in order.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`", n + 1)))?;
        entries.push((key.trim().to_owned(), value.trim().to_owned()));
    }
    Ok(entries)
}

pub fn read_entries(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_entries(&text)
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_mode(FeatureMode::Rgb)
    }
}

impl PipelineConfig {
    pub fn for_mode(mode: FeatureMode) -> Self {
        PipelineConfig {
            feature_mode: mode,
            variance_mode: VarianceMode::VksCached,
            grid: VarianceGrid::for_mode(mode),
            siltp: SiltpConfig::default(),
            mix: MixConfig::default(),
            tau_bf: CacheThreshold::default(),
            mrf: MrfConfig::default(),
            min_component_size: 15,
            posterior_threshold: 0.5,
            model: ModelConfig::default(),
            background_update: BackgroundUpdate::Conditional,
            reset: Some(ResetConfig::for_mode(mode)),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.mode() != self.feature_mode {
            return Err(Error::config("variance grid does not match the feature mode"));
        }
        if !(self.posterior_threshold > 0.0 && self.posterior_threshold < 1.0) {
            return Err(Error::config("posterior_threshold must lie in (0, 1)"));
        }
        if self.model.init_frames == 0 || self.model.bg_frames == 0 || self.model.fg_frames == 0 {
            return Err(Error::config("frame counts must be positive"));
        }
        if self.model.bg_frames > 255 || self.model.fg_frames > 255 {
            return Err(Error::config("sample rings hold at most 255 frames"));
        }
        if !(self.siltp.tau > 0.0) || self.siltp.radii.contains(&0) {
            return Err(Error::config("siltp_tau and siltp_radii must be positive"));
        }
        if let Some(r) = &self.reset {
            if !(r.t_i > 0.0) || r.relearn_frames == 0 {
                return Err(Error::config("reset_t_i and reset_relearn_frames must be positive"));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads must be positive"));
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&read_entries(path)?)?;
        Ok(cfg)
    }

    /// Parses the flat key-value format on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply(&parse_entries(text)?)?;
        Ok(cfg)
    }

    /// Applies overrides. `feature_mode` is applied first so that the
    /// remaining keys refine the defaults of the chosen mode.
    pub fn apply(&mut self, entries: &[(String, String)]) -> Result<()> {
        let lookup = |k: &str| entries.iter().rev().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
        if let Some(mode) = lookup("feature_mode") {
            let mode: FeatureMode = mode.parse()?;
            if mode != self.feature_mode {
                let keep_variance = self.variance_mode;
                let keep_threads = self.threads;
                *self = PipelineConfig::for_mode(mode);
                self.variance_mode = keep_variance;
                self.threads = keep_threads;
            }
        }
        let mut grid = GridParts::from_grid(&self.grid);
        let mut reset_enabled = self.reset.is_some();
        let mut reset = self
            .reset
            .clone()
            .unwrap_or_else(|| ResetConfig::for_mode(self.feature_mode));
        for (key, value) in entries {
            let v = value.as_str();
            match key.as_str() {
                "feature_mode" => {}
                "variance_mode" => self.variance_mode = v.parse()?,
                "bg_sigma_d" => grid.spatial = list(key, v)?,
                "bg_sigma_rgb" => grid.rgb = list(key, v)?,
                "bg_sigma_l" => grid.l = list(key, v)?,
                "bg_sigma_ab" => grid.ab = list(key, v)?,
                "bg_sigma_siltp" => grid.texture = scalar(key, v)?,
                "fg_sigma_d" => grid.fg_spatial = scalar(key, v)?,
                "fg_sigma_rgb" => grid.fg_rgb = scalar(key, v)?,
                "fg_sigma_l" => grid.fg_l = scalar(key, v)?,
                "fg_sigma_ab" => grid.fg_ab = scalar(key, v)?,
                "fg_sigma_siltp" => grid.fg_texture = scalar(key, v)?,
                "u" => self.mix = MixConfig::new(scalar(key, v)?, self.mix.alpha_f)?,
                "alpha_f" => self.mix = MixConfig::new(self.mix.u, scalar(key, v)?)?,
                "tau_bf" => self.tau_bf = CacheThreshold::new(scalar(key, v)?)?,
                "lambda" => self.mrf = MrfConfig::new(scalar(key, v)?)?,
                "min_component_size" => self.min_component_size = scalar(key, v)?,
                "posterior_threshold" => self.posterior_threshold = scalar(key, v)?,
                "init_frames" => self.model.init_frames = scalar(key, v)?,
                "sampled_frames" | "bg_frames" => self.model.bg_frames = scalar(key, v)?,
                "fg_frames" => self.model.fg_frames = scalar(key, v)?,
                "conditional_update" => {
                    self.background_update = if scalar::<bool>(key, v)? {
                        BackgroundUpdate::Conditional
                    } else {
                        BackgroundUpdate::Always
                    }
                }
                "reset_enabled" => reset_enabled = scalar(key, v)?,
                "reset_t_i" => reset.t_i = scalar(key, v)?,
                "reset_relearn_frames" => reset.relearn_frames = scalar(key, v)?,
                "siltp_tau" => self.siltp.tau = scalar(key, v)?,
                "siltp_radii" => {
                    let radii: Vec<u32> = list(key, v)?;
                    self.siltp.radii = radii
                        .try_into()
                        .map_err(|_| Error::config("siltp_radii needs exactly three radii"))?;
                }
                "threads" => self.threads = Some(scalar(key, v)?),
                other => return Err(Error::config(format!("unknown configuration key `{other}`"))),
            }
        }
        self.grid = grid.build(self.feature_mode)?;
        self.reset = reset_enabled.then_some(reset);
        self.validate()
    }

    /// Renders the configuration in the file format.
    pub fn to_text(&self) -> String {
        let g = GridParts::from_grid(&self.grid);
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut out = vec![
            format!("feature_mode = {}", self.feature_mode),
            format!("variance_mode = {}", self.variance_mode),
            format!("bg_sigma_d = {}", join(&g.spatial)),
        ];
        match self.feature_mode {
            FeatureMode::Rgb => {
                out.push(format!("bg_sigma_rgb = {}", join(&g.rgb)));
                out.push(format!("fg_sigma_rgb = {}", g.fg_rgb));
            }
            FeatureMode::LabSiltp => {
                out.push(format!("bg_sigma_l = {}", join(&g.l)));
                out.push(format!("bg_sigma_ab = {}", join(&g.ab)));
                out.push(format!("bg_sigma_siltp = {}", g.texture));
                out.push(format!("fg_sigma_l = {}", g.fg_l));
                out.push(format!("fg_sigma_ab = {}", g.fg_ab));
                out.push(format!("fg_sigma_siltp = {}", g.fg_texture));
            }
        }
        out.extend([
            format!("fg_sigma_d = {}", g.fg_spatial),
            format!("u = {}", self.mix.u),
            format!("alpha_f = {}", self.mix.alpha_f),
            format!("tau_bf = {}", self.tau_bf.value()),
            format!("lambda = {}", self.mrf.lambda),
            format!("min_component_size = {}", self.min_component_size),
            format!("posterior_threshold = {}", self.posterior_threshold),
            format!("init_frames = {}", self.model.init_frames),
            format!("sampled_frames = {}", self.model.bg_frames),
            format!("fg_frames = {}", self.model.fg_frames),
            format!(
                "conditional_update = {}",
                self.background_update == BackgroundUpdate::Conditional
            ),
            format!("reset_enabled = {}", self.reset.is_some()),
            format!("siltp_tau = {}", self.siltp.tau),
            format!("siltp_radii = {}", self.siltp.radii.map(|r| r.to_string()).join(", ")),
        ]);
        if let Some(r) = &self.reset {
            out.push(format!("reset_t_i = {}", r.t_i));
            out.push(format!("reset_relearn_frames = {}", r.relearn_frames));
        }
        if let Some(t) = self.threads {
            out.push(format!("threads = {t}"));
        }
        out.join("\n") + "\n"
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(format!("`{key}`: cannot parse `{value}`")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| scalar(key, v)).collect()
}

/// Grid fields for both feature modes, so that overrides can be applied
/// before the grid is rebuilt.
struct GridParts {
    spatial: Vec<f64>,
    rgb: Vec<f64>,
    l: Vec<f64>,
    ab: Vec<f64>,
    texture: f64,
    fg_spatial: f64,
    fg_rgb: f64,
    fg_l: f64,
    fg_ab: f64,
    fg_texture: f64,
}

impl GridParts {
    fn from_grid(grid: &VarianceGrid) -> Self {
        let mut parts = GridParts {
            spatial: grid.spatial().to_vec(),
            rgb: vec![1.25, 3.75, 11.25],
            l: vec![1.25, 2.5, 5.0],
            ab: vec![1.0, 1.5],
            texture: 0.75,
            fg_spatial: grid.foreground().spatial,
            fg_rgb: 3.75,
            fg_l: 3.75,
            fg_ab: 1.0,
            fg_texture: 0.75,
        };
        match grid.color() {
            ColorSet::Rgb(c) => parts.rgb = c.clone(),
            ColorSet::Lab { l, ab } => {
                parts.l = l.clone();
                parts.ab = ab.clone();
            }
        }
        if let Some(t) = grid.texture() {
            parts.texture = t;
        }
        match grid.foreground().color {
            ColorVariance::Rgb(c) => parts.fg_rgb = c,
            ColorVariance::Lab { l, ab } => {
                parts.fg_l = l;
                parts.fg_ab = ab;
            }
        }
        if let Some(t) = grid.foreground().texture {
            parts.fg_texture = t;
        }
        parts
    }

    fn build(self, mode: FeatureMode) -> Result<VarianceGrid> {
        match mode {
            FeatureMode::Rgb => VarianceGrid::new(
                self.spatial,
                ColorSet::Rgb(self.rgb),
                None,
                KernelVariances::rgb(self.fg_spatial, self.fg_rgb),
            ),
            FeatureMode::LabSiltp => VarianceGrid::new(
                self.spatial,
                ColorSet::Lab { l: self.l, ab: self.ab },
                Some(self.texture),
                KernelVariances::lab_siltp(self.fg_spatial, self.fg_l, self.fg_ab, self.fg_texture),
            ),
        }
    }
}
