use super::{estimate_normals, GraspError, GraspProposal, GraspSampler, GripperModel};
use crate::geometry::{backproject, BinaryMask, CameraIntrinsics, DepthImage};
use crate::pipeline::{GraspSettings, GraspStage, StageError};

pub type AnalyticGraspSettings = GraspSettings;

/// In-process grasp generator: masked backprojection, PCA normals, seeded antipodal sampling.
#[derive(Debug, Clone)]
pub struct AnalyticGraspStage {
    gripper: GripperModel,
    settings: AnalyticGraspSettings,
}

impl AnalyticGraspStage {
    pub fn new(gripper: GripperModel, settings: AnalyticGraspSettings) -> Self {
        Self { gripper, settings }
    }

    pub fn generate(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        mask: &BinaryMask,
    ) -> Result<Vec<GraspProposal>, GraspError> {
        let cloud = backproject(depth, intrinsics, Some(mask))?;
        let k = self.settings.normal_neighbors;
        if cloud.len() < k + 1 {
            return Ok(Vec::new());
        }
        // normals see the whole masked surface; only the sampled set is thinned
        let cloud = estimate_normals(&cloud, k)?;
        let n = cloud.len();
        let cap = self.settings.max_points;
        let cloud = if n > cap {
            let picked: Vec<usize> = (0..cap).map(|i| i * n / cap).collect();
            cloud.select(&picked)
        } else {
            cloud
        };
        GraspSampler::new(self.gripper, self.settings.sample_budget, self.settings.seed).sample(&cloud)
    }
}

impl GraspStage for AnalyticGraspStage {
    fn name(&self) -> &str {
        "analytic"
    }

    fn propose(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        mask: &BinaryMask,
    ) -> Result<Vec<GraspProposal>, StageError> {
        if mask.dims() != depth.dims() {
            return Err(StageError::BadRequest(format!(
                "mask {:?} does not match depth {:?}",
                mask.dims(),
                depth.dims()
            )));
        }
        self.generate(depth, intrinsics, mask)
            .map_err(|e| StageError::Internal(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_gives_no_proposals() {
        let stage = AnalyticGraspStage::new(GripperModel::default(), GraspSettings::default());
        let depth = DepthImage::new(32, 24, vec![0.5; 32 * 24]).unwrap();
        let k = CameraIntrinsics::new(300.0, 300.0, 16.0, 12.0).unwrap();
        assert!(stage.propose(&depth, &k, &BinaryMask::new(32, 24)).unwrap().is_empty());
        assert!(matches!(
            stage.propose(&depth, &k, &BinaryMask::new(3, 3)),
            Err(StageError::BadRequest(_))
        ));
    }
}
