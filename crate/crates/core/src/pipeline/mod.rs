//! Three-stage orchestration: detect, crop, segment, embed, grasp, filter, select, plan.

mod config;
mod stages;

pub use config::{
    BackendSettings, ConfigError, DetectorSettings, EndpointSettings, GraspSettings, OutputSettings, PipelineConfig,
    SegmenterSettings,
};
pub use stages::{Detection, DetectorStage, GraspStage, Segmentation, SegmenterStage, StageError};

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    crop_image, embed_mask_full, resample_nearest, BinaryMask, BoundingBox, CameraIntrinsics, DepthImage,
    GeometryError, ImageRgb, Pose6Dof,
};
use crate::grasp::{build_grasp_plan, mask_filter_grasps, select_top_grasp, GraspPlan, GraspProposal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPair {
    pub object_text: String,
    pub part_text: String,
}

impl PromptPair {
    pub fn new(object_text: &str, part_text: &str) -> Result<Self, RequestError> {
        let (object_text, part_text) = (object_text.trim(), part_text.trim());
        if object_text.is_empty() || part_text.is_empty() {
            return Err(RequestError::EmptyPrompt);
        }
        Ok(Self {
            object_text: object_text.to_string(),
            part_text: part_text.to_string(),
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RequestError {
    #[error("object and part prompts must be non-empty")]
    EmptyPrompt,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One RGB-D frame plus the prompt. Construction checks that color and depth align.
#[derive(Debug, Clone)]
pub struct GraspRequest {
    rgb: ImageRgb,
    depth: DepthImage,
    intrinsics: CameraIntrinsics,
    prompt: PromptPair,
    camera_to_world: Pose6Dof,
}

impl GraspRequest {
    pub fn new(
        rgb: ImageRgb,
        depth: DepthImage,
        intrinsics: CameraIntrinsics,
        prompt: PromptPair,
        camera_to_world: Pose6Dof,
    ) -> Result<Self, RequestError> {
        if rgb.dims() != depth.dims() {
            return Err(GeometryError::DimensionMismatch {
                expected: rgb.dims(),
                actual: depth.dims(),
            }
            .into());
        }
        intrinsics.validate()?;
        Ok(Self {
            rgb,
            depth,
            intrinsics,
            prompt,
            camera_to_world,
        })
    }

    pub fn rgb(&self) -> &ImageRgb {
        &self.rgb
    }

    pub fn depth(&self) -> &DepthImage {
        &self.depth
    }

    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.intrinsics
    }

    pub fn prompt(&self) -> &PromptPair {
        &self.prompt
    }

    pub fn camera_to_world(&self) -> &Pose6Dof {
        &self.camera_to_world
    }
}

/// Wall-clock milliseconds per stage. `overhead_ms` covers crop, embed, filter, select and plan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub detect_ms: f64,
    pub segment_ms: f64,
    pub grasp_ms: f64,
    pub overhead_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageArtifacts {
    pub crop: ImageRgb,
    pub crop_mask: BinaryMask,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub plan: GraspPlan,
    pub bbox: BoundingBox,
    pub detection_score: f64,
    pub segmentation_score: f64,
    pub part_mask_full: BinaryMask,
    pub selected: GraspProposal,
    /// Proposals returned by the grasp stage and how many survived the mask filter.
    pub proposals: usize,
    pub filtered: usize,
    pub timings: StageTimings,
    pub stage_artifacts: Option<StageArtifacts>,
}

impl PipelineResult {
    /// Field-wise equality ignoring timings.
    pub fn same_outputs(&self, other: &PipelineResult) -> bool {
        self.plan == other.plan
            && self.bbox == other.bbox
            && self.detection_score == other.detection_score
            && self.segmentation_score == other.segmentation_score
            && self.part_mask_full == other.part_mask_full
            && self.selected == other.selected
            && self.proposals == other.proposals
            && self.filtered == other.filtered
            && self.stage_artifacts == other.stage_artifacts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StageKind {
    Detector,
    Segmenter,
    GraspGenerator,
    Transport,
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageKind::Detector => "Detector",
            StageKind::Segmenter => "Segmenter",
            StageKind::GraspGenerator => "GraspGenerator",
            StageKind::Transport => "Transport",
        })
    }
}

/// Finer reason behind an attribution, for reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCause {
    NotFound,
    BelowThreshold,
    InvalidOutput,
    EmptyMask,
    NoDepthUnderMask,
    NoProposals,
    AllFiltered,
    StageFault,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FailureAttribution {
    pub stage: StageKind,
    pub cause: FailureCause,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stage={} {}", .0.stage, .0.detail)]
pub struct PipelineError(pub FailureAttribution);

impl PipelineError {
    fn new(stage: StageKind, cause: FailureCause, detail: impl Into<String>) -> Self {
        Self(FailureAttribution {
            stage,
            cause,
            detail: detail.into(),
        })
    }

    fn from_stage(stage: StageKind, err: StageError) -> Self {
        let cause = match &err {
            StageError::NotFound(_) => FailureCause::NotFound,
            StageError::Transport(_) | StageError::Timeout(_) => FailureCause::Unreachable,
            StageError::BadRequest(_) | StageError::Internal(_) => FailureCause::StageFault,
        };
        let stage = if err.is_transport() { StageKind::Transport } else { stage };
        Self::new(stage, cause, err.to_string())
    }

    pub fn attribution(&self) -> &FailureAttribution {
        &self.0
    }

    pub fn stage(&self) -> StageKind {
        self.0.stage
    }
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn count_valid_depth(mask: &BinaryMask, depth: &DepthImage) -> u64 {
    mask.iter_set().filter(|&(u, v)| depth.get(u, v) > 0.0).count() as u64
}

/// Run one request through the three stages.
pub fn run_pipeline(
    request: &GraspRequest,
    detector: &dyn DetectorStage,
    segmenter: &dyn SegmenterStage,
    grasper: &dyn GraspStage,
    config: &PipelineConfig,
) -> Result<PipelineResult, PipelineError> {
    let start = Instant::now();
    let (width, height) = request.rgb.dims();

    let t = Instant::now();
    let detection = detector
        .detect(&request.rgb, &request.prompt.object_text, config.detector.threshold)
        .map_err(|e| PipelineError::from_stage(StageKind::Detector, e))?;
    let detect_ms = ms_since(t);
    if !(detection.score >= config.detector.threshold) {
        return Err(PipelineError::new(
            StageKind::Detector,
            FailureCause::BelowThreshold,
            format!("score {:.3} below threshold {:.3}", detection.score, config.detector.threshold),
        ));
    }
    let bbox = detection.bbox;
    let crop = crop_image(&request.rgb, &bbox).map_err(|e| {
        PipelineError::new(StageKind::Detector, FailureCause::InvalidOutput, format!("box {bbox:?}: {e}"))
    })?;

    let t = Instant::now();
    let segmentation = segmenter
        .segment(&crop, &request.prompt.part_text)
        .map_err(|e| PipelineError::from_stage(StageKind::Segmenter, e))?;
    let segment_ms = ms_since(t);
    let crop_mask = if segmentation.mask.dims() == crop.dims() {
        segmentation.mask
    } else {
        resample_nearest(&segmentation.mask, crop.width(), crop.height())
    };
    if crop_mask.is_empty() {
        return Err(PipelineError::new(StageKind::Segmenter, FailureCause::EmptyMask, "empty mask"));
    }
    let part_mask_full = embed_mask_full(&crop_mask, &bbox, (width, height))
        .map_err(|e| PipelineError::new(StageKind::Segmenter, FailureCause::InvalidOutput, e.to_string()))?;
    let covered = count_valid_depth(&part_mask_full, &request.depth);
    if covered < config.segmenter.min_mask_points {
        return Err(PipelineError::new(
            StageKind::Segmenter,
            FailureCause::NoDepthUnderMask,
            format!("mask covers {covered} valid depth pixels, need {}", config.segmenter.min_mask_points),
        ));
    }

    let t = Instant::now();
    let proposals = grasper
        .propose(&request.depth, &request.intrinsics, &part_mask_full)
        .map_err(|e| PipelineError::from_stage(StageKind::GraspGenerator, e))?;
    let grasp_ms = ms_since(t);
    if proposals.is_empty() {
        return Err(PipelineError::new(
            StageKind::GraspGenerator,
            FailureCause::NoProposals,
            "no grasp proposals",
        ));
    }
    let kept = mask_filter_grasps(&proposals, &part_mask_full, &request.depth, &request.intrinsics, config.filter)
        .map_err(|e| PipelineError::new(StageKind::GraspGenerator, FailureCause::InvalidOutput, e.to_string()))?;
    let selected = select_top_grasp(&kept).map_err(|_| {
        PipelineError::new(
            StageKind::GraspGenerator,
            FailureCause::AllFiltered,
            format!("all {} proposals fell outside the part mask", proposals.len()),
        )
    })?;
    let plan = build_grasp_plan(&selected, &request.camera_to_world);

    let total_ms = ms_since(start);
    let stage_artifacts = config.output.keep_artifacts.then(|| StageArtifacts {
        crop,
        crop_mask,
    });
    Ok(PipelineResult {
        plan,
        bbox,
        detection_score: detection.score,
        segmentation_score: segmentation.score,
        part_mask_full,
        selected,
        proposals: proposals.len(),
        filtered: kept.len(),
        timings: StageTimings {
            detect_ms,
            segment_ms,
            grasp_ms,
            overhead_ms: (total_ms - detect_ms - segment_ms - grasp_ms).max(0.0),
            total_ms,
        },
        stage_artifacts,
    })
}

/// Stage wrapper that serializes calls when the stage declares single-flight.
struct Guarded<S: ?Sized> {
    stage: Arc<S>,
    lock: Option<Mutex<()>>,
}

impl<S: ?Sized> Guarded<S> {
    fn new(stage: Arc<S>, single_flight: bool) -> Self {
        Self {
            stage,
            lock: single_flight.then(|| Mutex::new(())),
        }
    }

    fn call<R>(&self, f: impl FnOnce(&S) -> R) -> R {
        let _guard = self.lock.as_ref().map(|m| m.lock().unwrap_or_else(|e| e.into_inner()));
        f(&self.stage)
    }
}

impl DetectorStage for Guarded<dyn DetectorStage> {
    fn name(&self) -> &str {
        self.stage.name()
    }

    fn detect(&self, image: &ImageRgb, object_text: &str, threshold: f64) -> Result<Detection, StageError> {
        self.call(|s| s.detect(image, object_text, threshold))
    }
}

impl SegmenterStage for Guarded<dyn SegmenterStage> {
    fn name(&self) -> &str {
        self.stage.name()
    }

    fn segment(&self, image: &ImageRgb, part_text: &str) -> Result<Segmentation, StageError> {
        self.call(|s| s.segment(image, part_text))
    }
}

impl GraspStage for Guarded<dyn GraspStage> {
    fn name(&self) -> &str {
        self.stage.name()
    }

    fn propose(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        mask: &BinaryMask,
    ) -> Result<Vec<GraspProposal>, StageError> {
        self.call(|s| s.propose(depth, intrinsics, mask))
    }
}

/// Reentrant orchestrator owning a stage triple and a config.
pub struct Pipeline {
    detector: Guarded<dyn DetectorStage>,
    segmenter: Guarded<dyn SegmenterStage>,
    grasper: Guarded<dyn GraspStage>,
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(
        detector: Arc<dyn DetectorStage>,
        segmenter: Arc<dyn SegmenterStage>,
        grasper: Arc<dyn GraspStage>,
        config: PipelineConfig,
    ) -> Self {
        let (d, s, g) = (detector.single_flight(), segmenter.single_flight(), grasper.single_flight());
        Self {
            detector: Guarded::new(detector, d),
            segmenter: Guarded::new(segmenter, s),
            grasper: Guarded::new(grasper, g),
            config,
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn stage_names(&self) -> [&str; 3] {
        [self.detector.name(), self.segmenter.name(), self.grasper.name()]
    }

    pub fn run(&self, request: &GraspRequest) -> Result<PipelineResult, PipelineError> {
        run_pipeline(request, &self.detector, &self.segmenter, &self.grasper, &self.config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Frame;
    use nalgebra::Vector3;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct FixedDetector(Result<Detection, StageError>);
    impl DetectorStage for FixedDetector {
        fn name(&self) -> &str {
            "fixed"
        }
        fn detect(&self, _: &ImageRgb, _: &str, _: f64) -> Result<Detection, StageError> {
            self.0.clone()
        }
    }

    struct FullSegmenter {
        empty: bool,
    }
    impl SegmenterStage for FullSegmenter {
        fn name(&self) -> &str {
            "full"
        }
        fn segment(&self, image: &ImageRgb, _: &str) -> Result<Segmentation, StageError> {
            Ok(Segmentation {
                mask: BinaryMask::from_fn(image.width(), image.height(), |_, _| !self.empty),
                score: 1.0,
            })
        }
    }

    struct FixedGrasper(Vec<GraspProposal>);
    impl GraspStage for FixedGrasper {
        fn name(&self) -> &str {
            "fixed"
        }
        fn propose(&self, _: &DepthImage, _: &CameraIntrinsics, _: &BinaryMask) -> Result<Vec<GraspProposal>, StageError> {
            Ok(self.0.clone())
        }
    }

    fn request() -> GraspRequest {
        GraspRequest::new(
            ImageRgb::filled(64, 48, [10, 20, 30]).unwrap(),
            DepthImage::new(64, 48, vec![0.5; 64 * 48]).unwrap(),
            CameraIntrinsics::new(500.0, 500.0, 32.0, 24.0).unwrap(),
            PromptPair::new("mug", "handle").unwrap(),
            Pose6Dof::identity(Frame::World),
        )
        .unwrap()
    }

    fn centered_grasp() -> GraspProposal {
        let a = Vector3::new(-0.005, 0.0, 0.5);
        let b = Vector3::new(0.005, 0.0, 0.5);
        GraspProposal {
            pose: Pose6Dof::from_translation((a + b) * 0.5, Frame::Camera),
            opening_width: 0.01,
            score: 0.9,
            contact_a: a,
            contact_b: b,
        }
    }

    fn ok_detector() -> FixedDetector {
        FixedDetector(Ok(Detection {
            bbox: BoundingBox::new(16, 12, 48, 36).unwrap(),
            score: 0.9,
        }))
    }

    #[test]
    fn happy_path() {
        let config = PipelineConfig::default();
        let result = run_pipeline(
            &request(),
            &ok_detector(),
            &FullSegmenter { empty: false },
            &FixedGrasper(vec![centered_grasp()]),
            &config,
        )
        .unwrap();
        assert_eq!(result.part_mask_full.count(), 32 * 24);
        assert_eq!(result.part_mask_full.dims(), (64, 48));
        assert_eq!(result.selected, centered_grasp());
        assert!((result.plan.pre_grasp.translation - Vector3::new(0.0, 0.0, 0.4)).norm() < 1e-12);
        let t = result.timings;
        let sum = t.detect_ms + t.segment_ms + t.grasp_ms + t.overhead_ms;
        assert!((t.total_ms - sum).abs() <= 1.0);
        assert!(t.total_ms >= t.detect_ms && t.total_ms >= t.grasp_ms);
    }

    #[test]
    fn attribution_of_each_failure() {
        let config = PipelineConfig::default();
        let req = request();
        let seg = FullSegmenter { empty: false };
        let grasp = FixedGrasper(vec![centered_grasp()]);

        let not_found = FixedDetector(Err(StageError::NotFound("no mug".into())));
        let err = run_pipeline(&req, &not_found, &seg, &grasp, &config).unwrap_err();
        assert_eq!(err.stage(), StageKind::Detector);

        let weak = FixedDetector(Ok(Detection {
            bbox: BoundingBox::new(0, 0, 4, 4).unwrap(),
            score: 0.1,
        }));
        let err = run_pipeline(&req, &weak, &seg, &grasp, &config).unwrap_err();
        assert_eq!((err.stage(), err.0.cause), (StageKind::Detector, FailureCause::BelowThreshold));

        let err = run_pipeline(&req, &ok_detector(), &FullSegmenter { empty: true }, &grasp, &config).unwrap_err();
        assert_eq!((err.stage(), err.0.cause), (StageKind::Segmenter, FailureCause::EmptyMask));

        let err = run_pipeline(&req, &ok_detector(), &seg, &FixedGrasper(vec![]), &config).unwrap_err();
        assert_eq!((err.stage(), err.0.cause), (StageKind::GraspGenerator, FailureCause::NoProposals));

        let mut off = centered_grasp();
        off.contact_a.x += 1.0;
        let err = run_pipeline(&req, &ok_detector(), &seg, &FixedGrasper(vec![off]), &config).unwrap_err();
        assert_eq!((err.stage(), err.0.cause), (StageKind::GraspGenerator, FailureCause::AllFiltered));

        let down = FixedDetector(Err(StageError::Timeout("10000 ms".into())));
        let err = run_pipeline(&req, &down, &seg, &grasp, &config).unwrap_err();
        assert_eq!(err.stage(), StageKind::Transport);
        assert!(err.to_string().starts_with("stage=Transport"));
    }

    #[test]
    fn mask_without_depth_is_a_segmenter_failure() {
        let req = GraspRequest::new(
            ImageRgb::filled(64, 48, [0, 0, 0]).unwrap(),
            DepthImage::zeros(64, 48).unwrap(),
            CameraIntrinsics::new(500.0, 500.0, 32.0, 24.0).unwrap(),
            PromptPair::new("mug", "handle").unwrap(),
            Pose6Dof::identity(Frame::World),
        )
        .unwrap();
        let err = run_pipeline(
            &req,
            &ok_detector(),
            &FullSegmenter { empty: false },
            &FixedGrasper(vec![]),
            &PipelineConfig::default(),
        )
        .unwrap_err();
        assert_eq!((err.stage(), err.0.cause), (StageKind::Segmenter, FailureCause::NoDepthUnderMask));
    }

    #[test]
    fn request_validation() {
        assert_eq!(PromptPair::new("  ", "handle"), Err(RequestError::EmptyPrompt));
        let bad = GraspRequest::new(
            ImageRgb::filled(4, 4, [0, 0, 0]).unwrap(),
            DepthImage::zeros(4, 5).unwrap(),
            CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap(),
            PromptPair::new("a", "b").unwrap(),
            Pose6Dof::identity(Frame::World),
        );
        assert!(bad.is_err());
    }

    struct CountingDetector {
        active: AtomicUsize,
        peak: AtomicUsize,
    }
    impl DetectorStage for CountingDetector {
        fn name(&self) -> &str {
            "counting"
        }
        fn detect(&self, _: &ImageRgb, _: &str, _: f64) -> Result<Detection, StageError> {
            let now = self.active.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(std::time::Duration::from_millis(5));
            self.active.fetch_sub(1, Ordering::SeqCst);
            Err(StageError::NotFound("x".into()))
        }
        fn single_flight(&self) -> bool {
            true
        }
    }

    #[test]
    fn single_flight_stage_is_serialized() {
        let detector = Arc::new(CountingDetector {
            active: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        });
        let pipeline = Pipeline::new(
            detector.clone(),
            Arc::new(FullSegmenter { empty: false }),
            Arc::new(FixedGrasper(vec![])),
            PipelineConfig::default(),
        );
        let req = request();
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| pipeline.run(&req).unwrap_err());
            }
        });
        assert_eq!(detector.peak.load(Ordering::SeqCst), 1);
    }
}
