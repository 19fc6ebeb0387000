use thiserror::Error;

use crate::geometry::{BinaryMask, BoundingBox, CameraIntrinsics, DepthImage, ImageRgb};
use crate::grasp::GraspProposal;

/// Failure reported by a stage implementation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StageError {
    /// Nothing matching the prompt above the confidence threshold.
    #[error("not found: {0}")]
    NotFound(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
    /// The stage could not be reached or its reply could not be decoded.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("timed out: {0}")]
    Timeout(String),
}

impl StageError {
    pub fn is_transport(&self) -> bool {
        matches!(self, StageError::Transport(_) | StageError::Timeout(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Mask in the coordinates of the image the segmenter was given.
    pub mask: BinaryMask,
    pub score: f64,
}

/// Open-vocabulary object detector returning its single top-ranked box.
pub trait DetectorStage: Send + Sync {
    fn name(&self) -> &str;

    fn detect(&self, image: &ImageRgb, object_text: &str, threshold: f64) -> Result<Detection, StageError>;

    /// When true the orchestrator never calls this stage concurrently.
    fn single_flight(&self) -> bool {
        false
    }
}

/// Part segmenter returning its single top-ranked mask for a crop.
pub trait SegmenterStage: Send + Sync {
    fn name(&self) -> &str;

    fn segment(&self, image: &ImageRgb, part_text: &str) -> Result<Segmentation, StageError>;

    fn single_flight(&self) -> bool {
        false
    }
}

/// Grasp generator returning a ranked proposal list in the camera frame.
pub trait GraspStage: Send + Sync {
    fn name(&self) -> &str;

    fn propose(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        mask: &BinaryMask,
    ) -> Result<Vec<GraspProposal>, StageError>;

    fn single_flight(&self) -> bool {
        false
    }
}
