//! Background subtraction with joint domain-range kernel scores.
//!
//! Every pixel of a frame is scored against two sample models, a background
//! model holding a few sampled frames and a foreground model holding the most
//! recent frames, using Gaussian kernels over position and appearance. The
//! background kernel variances are chosen per pixel by maximizing the score
//! over a small grid. The resulting posterior field is smoothed with a Potts
//! MRF and cleaned of small components.
//!
//! ```
//! use vks::eval::{synth_generate, SynthSpec};
//! use vks::pipeline::{run_frames, PipelineConfig};
//!
//! let scene = synth_generate(&SynthSpec::static_scene(7))?;
//! let results = run_frames(PipelineConfig::default(), &scene.frames[..60])?;
//! assert_eq!(results.len(), 10);
//! assert!(results.iter().all(|r| r.mask.foreground_count() == 0));
//! # Ok::<(), vks::Error>(())
//! ```

// `!(x > 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod features;
pub mod kde;
pub mod maps;
pub mod model;
pub mod mrf;
pub mod pipeline;
pub mod variance;

pub use error::{Error, Result};
pub use features::{FeatureMode, Frame};
pub use maps::{LabelMask, PosteriorMap};
pub use pipeline::{BackgroundSubtractor, FrameResult, PipelineConfig, VarianceMode};
