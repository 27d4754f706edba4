//! The per-frame loop.
//!
//! Frames are consumed in order. The first `init_frames` build the models.
//! Every later frame is classified against the models as they stood before
//! it arrived, cleaned by MRF smoothing and a small-component filter, and
//! then folded into the models using its pre-smoothing posterior. A sudden
//! global illumination change throws the background away and relearns it.

mod components;
mod config;
pub mod io;

use std::time::{Duration, Instant};

use rayon::prelude::*;

pub use components::filter_small_components;
pub use config::{parse_entries, read_entries, PipelineConfig, VarianceMode};

use crate::error::{Error, Result};
use crate::features::{FeatureExtractor, FeatureFrame, Frame};
use crate::maps::{LabelMask, PosteriorMap};
use crate::model::{illumination_reset_check, initialize, update_with, ProcessModel};
use crate::mrf::mrf_smooth;
use crate::variance::{classify_uniform, classify_vks, classify_with_cache, Classification, VarianceCache};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "BGSUB_THREADS";

/// Classification output for one frame.
#[derive(Debug, Clone)]
pub struct FrameResult {
    pub frame_index: u64,
    /// `P(bg|a)` before smoothing.
    pub posterior: PosteriorMap,
    /// Final labels after MRF smoothing and the component filter.
    pub mask: LabelMask,
    /// Background candidate used per pixel, indexing the grid's candidates.
    pub selected: Vec<u16>,
    /// Fraction of pixels where the variance search ran.
    pub search_fraction: f64,
    pub elapsed: Duration,
}

impl FrameResult {
    /// Recomputes the mask from the stored posterior.
    pub fn derive_mask(posterior: &PosteriorMap, config: &PipelineConfig) -> LabelMask {
        // The threshold is implied by the MRF unaries, which favor background
        // exactly when P(bg) > 0.5.
        let labels = if config.mrf.lambda == 0.0 {
            posterior.threshold(config.posterior_threshold)
        } else {
            mrf_smooth(posterior, &config.mrf)
        };
        filter_small_components(&labels, config.min_component_size)
    }
}

// One per subtractor; boxing would only add an indirection.
#[allow(clippy::large_enum_variant)]
enum Phase {
    Learning {
        frames: Vec<FeatureFrame>,
        target: usize,
    },
    Running {
        bg: ProcessModel,
        fg: ProcessModel,
        cache: VarianceCache,
    },
}

/// Stateful background subtractor fed one frame at a time.
pub struct BackgroundSubtractor {
    config: PipelineConfig,
    extractor: FeatureExtractor,
    pool: rayon::ThreadPool,
    phase: Phase,
    previous: Option<Frame>,
    resets: usize,
}

fn thread_count(config: &PipelineConfig) -> Result<usize> {
    if let Some(n) = config.threads {
        return Ok(n);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::config(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(0),
    }
}

impl BackgroundSubtractor {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(thread_count(&config)?)
            .build()
            .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
        Ok(BackgroundSubtractor {
            extractor: FeatureExtractor::new(config.feature_mode, config.siltp.clone()),
            phase: Phase::Learning {
                frames: Vec::new(),
                target: config.model.init_frames,
            },
            config,
            pool,
            previous: None,
            resets: 0,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    /// Background and foreground models, once initialized.
    pub fn models(&self) -> Option<(&ProcessModel, &ProcessModel)> {
        match &self.phase {
            Phase::Running { bg, fg, .. } => Some((bg, fg)),
            Phase::Learning { .. } => None,
        }
    }

    pub fn is_learning(&self) -> bool {
        matches!(self.phase, Phase::Learning { .. })
    }

    /// Number of illumination resets triggered so far.
    pub fn resets(&self) -> usize {
        self.resets
    }

    /// Consumes one frame; returns its classification unless the frame went
    /// into (re)learning the background.
    pub fn push(&mut self, frame: Frame) -> Result<Option<FrameResult>> {
        if let Some(prev) = &self.previous {
            if !prev.same_size(&frame) {
                return Err(Error::usage(format!(
                    "frame {} is {}x{}, sequence is {}x{}",
                    frame.index(),
                    frame.width(),
                    frame.height(),
                    prev.width(),
                    prev.height()
                )));
            }
            if frame.index() <= prev.index() {
                return Err(Error::usage(format!(
                    "frame index {} does not follow {}",
                    frame.index(),
                    prev.index()
                )));
            }
        }
        if let (Phase::Running { .. }, Some(reset), Some(prev)) = (&self.phase, &self.config.reset, &self.previous) {
            if illumination_reset_check(prev, &frame, reset, self.config.feature_mode)? {
                log::info!("illumination change at frame {}, relearning background", frame.index());
                self.resets += 1;
                self.phase = Phase::Learning {
                    frames: Vec::new(),
                    target: reset.relearn_frames,
                };
            }
        }
        let features = self.extractor.extract_frame(&frame);
        let result = match &mut self.phase {
            Phase::Learning { frames, target } => {
                frames.push(features);
                if frames.len() >= *target {
                    let (bg, fg) = initialize(frames, &self.config.model)?;
                    let cache = VarianceCache::new(frame.width(), frame.height());
                    self.phase = Phase::Running { bg, fg, cache };
                }
                None
            }
            Phase::Running { bg, fg, cache } => {
                Some(classify_frame(&self.config, &self.pool, &features, bg, fg, cache))
            }
        };
        self.previous = Some(frame);
        Ok(result)
    }
}

fn classify_frame(
    config: &PipelineConfig,
    pool: &rayon::ThreadPool,
    features: &FeatureFrame,
    bg: &mut ProcessModel,
    fg: &mut ProcessModel,
    cache: &mut VarianceCache,
) -> FrameResult {
    let start = Instant::now();
    let width = features.width as usize;
    let grid = &config.grid;
    let mix = &config.mix;
    let at = |i: usize| features.vector((i % width) as u32, (i / width) as u32);
    let outcomes: Vec<Classification> = {
        let (bg, fg) = (&*bg, &*fg);
        pool.install(|| match config.variance_mode {
            VarianceMode::Uniform => (0..features.appearances.len())
                .into_par_iter()
                .map(|i| classify_uniform(&at(i), bg, fg, mix, grid))
                .collect(),
            VarianceMode::Vks => (0..features.appearances.len())
                .into_par_iter()
                .map(|i| classify_vks(&at(i), bg, fg, mix, grid))
                .collect(),
            VarianceMode::VksCached => cache
                .entries_mut()
                .par_iter_mut()
                .enumerate()
                .map(|(i, entry)| classify_with_cache(&at(i), bg, fg, entry, config.tau_bf, mix, grid))
                .collect(),
        })
    };

    let posterior = PosteriorMap::new(
        features.width,
        features.height,
        outcomes.iter().map(|o| o.posterior).collect(),
    )
    .expect("posteriors lie in [0, 1]");
    let mask = FrameResult::derive_mask(&posterior, config);

    for (i, o) in outcomes.iter().enumerate() {
        update_with(bg, fg, &at(i), o.posterior, features.index, config.background_update);
    }

    let searched = outcomes.iter().filter(|o| o.searched).count();
    FrameResult {
        frame_index: features.index,
        posterior,
        mask,
        selected: outcomes.iter().map(|o| o.selected as u16).collect(),
        search_fraction: searched as f64 / outcomes.len() as f64,
        elapsed: start.elapsed(),
    }
}

/// Iterator adapter running a [`BackgroundSubtractor`] over a frame source.
///
/// Yields results in frame order. An empty source yields one usage error;
/// a failing frame yields its error and ends the sequence.
pub struct Sequence<I> {
    subtractor: Option<BackgroundSubtractor>,
    frames: I,
    started: bool,
}

impl<I> Iterator for Sequence<I>
where
    I: Iterator<Item = Result<Frame>>,
{
    type Item = Result<FrameResult>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let subtractor = self.subtractor.as_mut()?;
            match self.frames.next() {
                None => {
                    self.subtractor = None;
                    if !self.started {
                        return Some(Err(Error::usage("frame source is empty")));
                    }
                    return None;
                }
                Some(frame) => {
                    self.started = true;
                    match frame.and_then(|f| subtractor.push(f)) {
                        Ok(None) => continue,
                        Ok(Some(result)) => return Some(Ok(result)),
                        Err(e) => {
                            self.subtractor = None;
                            return Some(Err(e));
                        }
                    }
                }
            }
        }
    }
}

/// Runs the pipeline lazily over `frames`.
pub fn process_sequence<I>(config: PipelineConfig, frames: I) -> Result<Sequence<I::IntoIter>>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    Ok(Sequence {
        subtractor: Some(BackgroundSubtractor::new(config)?),
        frames: frames.into_iter(),
        started: false,
    })
}

/// Runs the pipeline over in-memory frames and collects every result.
pub fn run_frames(config: PipelineConfig, frames: &[Frame]) -> Result<Vec<FrameResult>> {
    process_sequence(config, frames.iter().cloned().map(Ok))?.collect()
}
