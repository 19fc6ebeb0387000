//! Dataset manifest: a TOML document listing labelled samples with paths relative to the
//! manifest's directory.
//!
//! ```toml
//! version = 1
//!
//! [[samples]]
//! image = "rgb/0000.png"
//! depth = "depth/0000.png"   # optional
//! mask = "masks/0000.png"
//! object = "red mug"
//! part = "handle"
//! group = false              # true for multi-object images
//! category = "Mugs"
//! object_name = "red mug"    # defaults to `object`
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::geometry::{BinaryMask, DepthImage, ImageRgb};
use crate::io::{read_depth, read_mask, read_rgb, write_file};
use crate::pipeline::PromptPair;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    pub mask: PathBuf,
    pub object: String,
    pub part: String,
    #[serde(default)]
    pub group: bool,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_name: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDoc {
    version: u32,
    #[serde(default)]
    samples: Vec<ManifestEntry>,
}

/// How much checking `load_manifest` does up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validation {
    /// Files must exist.
    Lazy,
    /// Files must exist and the mask must match the image dimensions.
    Eager,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegSample {
    pub image: PathBuf,
    pub depth: Option<PathBuf>,
    pub prompt: PromptPair,
    pub gt_mask: PathBuf,
    pub group: bool,
    pub category: String,
    pub object_name: String,
}

#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub image: ImageRgb,
    pub mask: BinaryMask,
    pub depth: Option<DepthImage>,
}

impl SegSample {
    /// Decode the sample's files. `index` only labels errors.
    pub fn load(&self, index: usize) -> Result<LoadedSample, EvalError> {
        let err = |path: &Path, message: String| EvalError::Sample {
            index,
            path: path.to_path_buf(),
            message,
        };
        let image = read_rgb(&self.image).map_err(|e| err(&self.image, e.to_string()))?;
        let mask = read_mask(&self.gt_mask).map_err(|e| err(&self.gt_mask, e.to_string()))?;
        if mask.dims() != image.dims() {
            return Err(err(
                &self.gt_mask,
                format!("mask is {:?} but image is {:?}", mask.dims(), image.dims()),
            ));
        }
        let depth = match &self.depth {
            Some(p) => {
                let d = read_depth(p).map_err(|e| err(p, e.to_string()))?;
                if d.dims() != image.dims() {
                    return Err(err(p, format!("depth is {:?} but image is {:?}", d.dims(), image.dims())));
                }
                Some(d)
            }
            None => None,
        };
        Ok(LoadedSample { image, mask, depth })
    }
}

fn png_dims(path: &Path) -> Result<(u32, u32), String> {
    image::image_dimensions(path).map_err(|e| e.to_string())
}

pub fn load_manifest(path: &Path, validation: Validation) -> Result<Vec<SegSample>, EvalError> {
    let manifest_err = |message: String| EvalError::Manifest {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| manifest_err(e.to_string()))?;
    let doc: ManifestDoc = toml::from_str(&text).map_err(|e| manifest_err(e.to_string()))?;
    if doc.version != MANIFEST_VERSION {
        return Err(manifest_err(format!(
            "schema version {} not supported (expected {MANIFEST_VERSION})",
            doc.version
        )));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let base = std::path::absolute(base).map_err(|e| manifest_err(e.to_string()))?;

    let mut samples = Vec::with_capacity(doc.samples.len());
    for (index, entry) in doc.samples.into_iter().enumerate() {
        let sample_err = |p: &Path, message: String| EvalError::Sample {
            index,
            path: p.to_path_buf(),
            message,
        };
        let image = base.join(&entry.image);
        let gt_mask = base.join(&entry.mask);
        let depth = entry.depth.as_ref().map(|d| base.join(d));
        for p in [Some(&image), Some(&gt_mask), depth.as_ref()].into_iter().flatten() {
            if !p.is_file() {
                return Err(sample_err(p, "file not found".into()));
            }
        }
        if validation == Validation::Eager {
            let dims = png_dims(&image).map_err(|m| sample_err(&image, m))?;
            for p in [Some(&gt_mask), depth.as_ref()].into_iter().flatten() {
                let d = png_dims(p).map_err(|m| sample_err(p, m))?;
                if d != dims {
                    return Err(sample_err(p, format!("dimensions {d:?} differ from image {dims:?}")));
                }
            }
        }
        let prompt = PromptPair::new(&entry.object, &entry.part).map_err(|e| sample_err(&image, e.to_string()))?;
        samples.push(SegSample {
            image,
            depth,
            object_name: entry.object_name.unwrap_or_else(|| prompt.object_text.clone()),
            prompt,
            gt_mask,
            group: entry.group,
            category: entry.category,
        });
    }
    Ok(samples)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<(), EvalError> {
    let doc = ManifestDoc {
        version: MANIFEST_VERSION,
        samples: entries.to_vec(),
    };
    let text = toml::to_string_pretty(&doc).map_err(|e| EvalError::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_file(path, text.as_bytes())?;
    Ok(())
}
