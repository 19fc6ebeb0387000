//! Parallel-jaw grasp synthesis over masked depth, plus the mask filter, top-1
//! selection and pre/grasp/post waypoint plan that every grasp backend goes through.

mod antipodal;
mod filter;
mod knn;
mod normals;
mod plan;
mod stage;

pub use antipodal::{canonical_order, pair_count, sample_antipodal_grasps, GraspSampler};
pub use filter::{mask_filter_grasps, select_top_grasp, FilterTolerances};
pub use normals::{estimate_normals, DEFAULT_NORMAL_NEIGHBORS};
pub use plan::{build_grasp_plan, APPROACH_OFFSET, LIFT_OFFSET};
pub use stage::{AnalyticGraspStage, AnalyticGraspSettings};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, GeometryError, Pose6Dof};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraspError {
    #[error("need at least {needed} points, found {found}")]
    InsufficientPoints { needed: usize, found: usize },
    #[error("no grasp found")]
    NoGraspFound,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Parallel gripper geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperModel {
    /// Largest jaw opening, meters.
    pub max_opening: f64,
    /// Finger length along the approach axis, meters.
    pub finger_depth: f64,
    /// Friction cone half-angle, degrees.
    pub friction_half_angle: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            max_opening: 0.08,
            finger_depth: 0.04,
            friction_half_angle: 20.0,
        }
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<(), GraspError> {
        let positive = self.max_opening > 0.0 && self.finger_depth > 0.0 && self.friction_half_angle > 0.0;
        if !positive || self.friction_half_angle >= 90.0 {
            return Err(GraspError::InvalidParameter(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn min_cos(&self) -> f64 {
        self.friction_half_angle.to_radians().cos()
    }
}

/// A scored two-contact grasp in the camera frame.
///
/// Pose axes: +x closes the jaws (contact_a → contact_b), +z approaches the object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspProposal {
    pub pose: Pose6Dof,
    pub opening_width: f64,
    pub score: f64,
    pub contact_a: Vector3<f64>,
    pub contact_b: Vector3<f64>,
}

impl GraspProposal {
    pub fn midpoint(&self) -> Vector3<f64> {
        (self.contact_a + self.contact_b) * 0.5
    }

    /// Translate the whole proposal along its own approach axis.
    pub fn shifted_along_approach(&self, offset: f64) -> GraspProposal {
        let d = self.pose.z_axis() * offset;
        GraspProposal {
            pose: Pose6Dof::new(self.pose.rotation, self.pose.translation + d, self.pose.frame),
            contact_a: self.contact_a + d,
            contact_b: self.contact_b + d,
            ..*self
        }
    }
}

/// Pre-grasp, grasp and post-grasp waypoints sharing one orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPlan {
    pub pre_grasp: Pose6Dof,
    pub grasp: Pose6Dof,
    pub post_grasp: Pose6Dof,
    pub frame: Frame,
    /// Jaw opening the grasp was planned with, meters.
    pub opening_width: f64,
}
