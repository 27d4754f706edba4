//! Frame sequences on disk: a directory of 8-bit RGB images read in
//! lexicographic file-name order, and ground-truth masks matched by stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::features::Frame;
use crate::maps::LabelMask;
use crate::pipeline::FrameResult;

const EXTENSIONS: [&str; 2] = ["png", "bmp"];

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_owned(),
        source,
    }
}

/// Image files in `dir`, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_error(dir))? {
        let path = entry.map_err(io_error(dir))?.path();
        let supported = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()));
        if supported && path.is_file() {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(paths)
}

pub fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn read_frame(path: &Path, index: u64) -> Result<Frame> {
    let image = image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    Ok(Frame::from_rgb8(&image.to_rgb8(), index))
}

pub fn write_frame(path: &Path, frame: &Frame) -> Result<()> {
    frame.to_rgb8().save(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

pub fn read_mask(path: &Path) -> Result<LabelMask> {
    let image = image::open(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })?;
    Ok(LabelMask::from_luma8(&image.to_luma8()))
}

pub fn write_mask(path: &Path, mask: &LabelMask) -> Result<()> {
    mask.to_luma8().save(path).map_err(|source| Error::Image {
        path: path.to_owned(),
        source,
    })
}

/// A sorted directory of frames, decoded lazily.
#[derive(Debug, Clone)]
pub struct FrameDirectory {
    paths: Vec<PathBuf>,
}

impl FrameDirectory {
    pub fn open(dir: &Path) -> Result<Self> {
        Ok(FrameDirectory {
            paths: list_images(dir)?,
        })
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn stems(&self) -> Vec<String> {
        self.paths.iter().map(|p| stem(p)).collect()
    }

    /// Frames in order, indexed by their position in the directory.
    pub fn frames(&self) -> impl Iterator<Item = Result<Frame>> + '_ {
        self.paths.iter().enumerate().map(|(i, p)| read_frame(p, i as u64))
    }
}

/// Ground-truth masks keyed by file stem.
pub fn read_ground_truth(dir: &Path) -> Result<BTreeMap<String, LabelMask>> {
    list_images(dir)?
        .into_iter()
        .map(|p| Ok((stem(&p), read_mask(&p)?)))
        .collect()
}

/// Writes `posterior/<stem>.png` and `mask/<stem>.png` under `out`.
pub fn write_result(out: &Path, stem: &str, result: &FrameResult) -> Result<()> {
    let posterior_dir = out.join("posterior");
    let mask_dir = out.join("mask");
    for dir in [&posterior_dir, &mask_dir] {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
    }
    let path = posterior_dir.join(format!("{stem}.png"));
    result.posterior.to_luma8().save(&path).map_err(|source| Error::Image {
        path: path.clone(),
        source,
    })?;
    write_mask(&mask_dir.join(format!("{stem}.png")), &result.mask)
}
