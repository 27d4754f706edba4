//! Scoring masks against ground truth, and synthetic test scenes.

mod synth;

use std::fmt::Write as _;
use std::path::Path;

pub use synth::{synth_generate, MovingObject, Park, SceneKind, SynthSequence, SynthSpec, OBJECT_COLOR};

use crate::error::{Error, Result};
use crate::maps::LabelMask;

/// Pixel counts and derived scores for one frame; foreground is positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameScore {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

impl FrameScore {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f_measure = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        FrameScore {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f_measure,
        }
    }
}

pub fn f_measure(pred: &LabelMask, gt: &LabelMask) -> Result<FrameScore> {
    if !pred.same_size(gt) {
        return Err(Error::usage(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(FrameScore::from_counts(tp, fp, fn_))
}

/// Scores for the evaluated frames of one sequence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<(u64, FrameScore)>,
}

impl EvalReport {
    pub fn push(&mut self, frame_index: u64, score: FrameScore) {
        self.rows.push((frame_index, score));
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Mean of the per-frame F-measures; 0 for an empty report.
    pub fn mean_f(&self) -> f64 {
        if self.rows.is_empty() {
            return 0.0;
        }
        self.rows.iter().map(|(_, s)| s.f_measure).sum::<f64>() / self.rows.len() as f64
    }

    /// Scores from counts summed over every frame.
    pub fn pooled(&self) -> FrameScore {
        let (tp, fp, fn_) = self
            .rows
            .iter()
            .fold((0, 0, 0), |(a, b, c), (_, s)| (a + s.tp, b + s.fp, c + s.fn_));
        FrameScore::from_counts(tp, fp, fn_)
    }

    /// One row per frame followed by `mean` and `pooled` summary rows.
    /// The `mean` row carries averaged precision and recall and leaves
    /// the count columns empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame_index,tp,fp,fn,precision,recall,f_measure\n");
        for (i, s) in &self.rows {
            let _ = writeln!(
                out,
                "{i},{},{},{},{:.6},{:.6},{:.6}",
                s.tp, s.fp, s.fn_, s.precision, s.recall, s.f_measure
            );
        }
        let n = self.rows.len().max(1) as f64;
        let mean_p = self.rows.iter().map(|(_, s)| s.precision).sum::<f64>() / n;
        let mean_r = self.rows.iter().map(|(_, s)| s.recall).sum::<f64>() / n;
        let _ = writeln!(out, "mean,,,,{mean_p:.6},{mean_r:.6},{:.6}", self.mean_f());
        let p = self.pooled();
        let _ = writeln!(
            out,
            "pooled,{},{},{},{:.6},{:.6},{:.6}",
            p.tp, p.fp, p.fn_, p.precision, p.recall, p.f_measure
        );
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }
}
