//! Image, mask, depth, intrinsics and rigid-pose types.
//!
//! Conventions used throughout the crate:
//! - pixel `(u, v)` addresses column `u`, row `v`; buffers are row-major;
//! - camera frame is right-handed with +z forward, +x right, +y down;
//! - quaternions are stored and serialized as `(w, x, y, z)`;
//! - depth is meters in memory, `0.0` marks an invalid measurement.

mod camera;
mod image;
mod mask;
mod pose;

pub use camera::{backproject, project, CameraIntrinsics, PointCloud};
pub use image::{crop_depth, crop_image, DepthImage, ImageRgb};
pub use mask::{crop_mask, embed_mask_full, resample_nearest, BinaryMask, BoundingBox};
pub use pose::{compose_pose, Frame, Pose6Dof};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("point is behind the camera (z = {0})")]
    BehindCamera(f64),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        actual: (u32, u32),
    },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
}
