//! Parametric scenes, raycast rendering, oracle and faulty stages, trial classification.

mod campaign;
pub mod catalog;
mod classify;
mod faults;
mod generate;
mod oracle;
pub mod palette;
mod render;
mod scene;
mod shapes;

use thiserror::Error;

use crate::io::IoError;

pub use campaign::{
    failure_outcome, grasp_request, MIDPOINT_SEARCH_PX, oracle_stages, run_campaign, run_sim_trial, trial_seed, CampaignSpec, FaultPlan,
    SimTrial, TrialOutcome,
};
pub use classify::{classify_sim_trial, ClassifierThresholds, OutcomeTaxonomy, Verdict};
pub use faults::{Fault, FaultyDetector, FaultyGrasper, FaultySegmenter};
pub use generate::{generate_scene, CameraRig, GeneratedScene, SceneRequest, UNOCCLUDED};
pub use oracle::{
    ground_truth_bbox, ground_truth_mask, image_fingerprint, GtFrame, OracleDetector, OracleLibrary, OracleSegmenter,
};
pub use render::{pixel_to_world, raycast_render, raycast_render_subset, RenderOutput};
pub use scene::{ObjectSpec, PartSpec, PoseDoc, SceneSpec};
pub use shapes::{PrimitiveShape, ShapeKind};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("ambiguous: {0}")]
    Ambiguous(String),
}
