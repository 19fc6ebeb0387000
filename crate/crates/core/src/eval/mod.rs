//! Segmentation mIoU studies over labelled datasets and bookkeeping of grasp trial logs.

mod augment;
mod dataset;
mod iou;
mod manifest;
mod report;
mod sankey;
mod seg;
mod trials;

use std::path::PathBuf;

use thiserror::Error;

use crate::io::IoError;
use crate::sim::SimError;

pub use augment::{augment, hflip_image, hflip_mask, rotate_image, rotate_mask, AugmentationOp, AugmentedSample};
pub use dataset::{write_scene_dataset, DatasetSummary};
pub use iou::compute_iou;
pub use manifest::{load_manifest, write_manifest, LoadedSample, ManifestEntry, SegSample, Validation, MANIFEST_VERSION};
pub use report::{seg_report_csv, trial_report_csv, write_seg_report, write_trial_report};
pub use sankey::{export_sankey, ROOT as SANKEY_ROOT, module_group, SankeyGraph, SankeyLink, SankeyNode};
pub use seg::{
    evaluate_segmentation, parse_object_scores, read_object_scores, CategoryScore, DatasetOracle, ObjectScore,
    SampleScore, SegEvaluation, SegReport,
};
pub use trials::{
    aggregate_trials, ingest_trial_log, parse_trial_log, write_trial_log, ScenarioReport, TrialRecord, TrialReport,
    TrialScenario,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("sample {index} ({path}): {message}")]
    Sample {
        index: usize,
        path: PathBuf,
        message: String,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Sim(#[from] SimError),
}
