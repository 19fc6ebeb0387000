//! Simulated trials: generate a scene, run the pipeline on oracle (optionally faulted)
//! stages, classify the resulting plan.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::classify::{classify_sim_trial, OutcomeTaxonomy, Verdict};
use super::faults::{Fault, FaultyDetector, FaultyGrasper, FaultySegmenter};
use super::generate::{generate_scene, CameraRig, GeneratedScene, SceneRequest};
use super::oracle::{GtFrame, OracleDetector, OracleLibrary, OracleSegmenter};
use super::SimError;
use crate::geometry::project;
use crate::grasp::AnalyticGraspStage;
use crate::pipeline::{
    run_pipeline, DetectorStage, FailureAttribution, GraspRequest, GraspStage, PipelineConfig, PromptPair,
    SegmenterStage, StageKind, StageTimings,
};

/// Faults with per-trial injection probabilities. Text form: entries `fault[:rate]`
/// separated by `;` or whitespace, e.g. `wrong_object:0.1; mask_shift(0,-120)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaultPlan {
    pub entries: Vec<(Fault, f64)>,
}

impl FaultPlan {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn always(fault: Fault) -> Self {
        Self {
            entries: vec![(fault, 1.0)],
        }
    }

    /// Faults active for one trial, each drawn independently.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<Fault> {
        self.entries
            .iter()
            .filter(|(_, rate)| rng.gen_bool(*rate))
            .map(|(f, _)| *f)
            .collect()
    }
}

impl FromStr for FaultPlan {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for item in s.split(|c: char| c == ';' || c.is_whitespace()).filter(|t| !t.is_empty()) {
            let (fault, rate) = match item.rsplit_once(':') {
                Some((f, r)) => {
                    let rate = r
                        .parse::<f64>()
                        .ok()
                        .filter(|r| (0.0..=1.0).contains(r))
                        .ok_or_else(|| format!("rate in {item:?} must be within [0, 1]"))?;
                    (f, rate)
                }
                None => (item, 1.0),
            };
            entries.push((fault.parse()?, rate));
        }
        Ok(Self { entries })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSpec {
    pub scenes: usize,
    pub objects: usize,
    pub seed: u64,
    pub faults: FaultPlan,
    pub rig: CameraRig,
    pub shared_part: bool,
    pub all_parts_visible: bool,
}

impl CampaignSpec {
    pub fn new(scenes: usize, objects: usize, seed: u64) -> Self {
        Self {
            scenes,
            objects,
            seed,
            faults: FaultPlan::none(),
            rig: CameraRig::default(),
            shared_part: false,
            all_parts_visible: false,
        }
    }

    /// Scene request of trial `index`; single-object trials cycle the five headings.
    pub fn request(&self, index: usize) -> SceneRequest {
        SceneRequest {
            objects: self.objects,
            orientation_index: (self.objects == 1).then_some((index % 5) as u8),
            shared_part: self.shared_part,
            all_parts_visible: self.all_parts_visible,
        }
    }
}

/// Independent per-trial seed.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub outcome: OutcomeTaxonomy,
    /// Present when the pipeline produced a plan.
    pub verdict: Option<Verdict>,
    /// Present when the pipeline failed.
    pub failure: Option<FailureAttribution>,
    /// Whether the selected midpoint projects onto a ground-truth target-part pixel.
    pub midpoint_in_part: Option<bool>,
    /// Chebyshev pixel distance from the projected midpoint to the nearest ground-truth
    /// target-part pixel; `None` past `MIDPOINT_SEARCH_PX` or behind the camera.
    pub midpoint_offset_px: Option<u32>,
    pub timings: Option<StageTimings>,
}

#[derive(Debug, Clone)]
pub struct SimTrial {
    pub index: usize,
    pub seed: u64,
    pub object_name: String,
    pub object_query: String,
    pub part: String,
    pub objects: usize,
    pub orientation_index: Option<u8>,
    pub visibility: f64,
    pub faults: Vec<Fault>,
    pub result: TrialOutcome,
}

pub const MIDPOINT_SEARCH_PX: u32 = 16;

/// Outcome recorded for a pipeline that stopped at `stage`.
pub fn failure_outcome(stage: StageKind) -> OutcomeTaxonomy {
    match stage {
        StageKind::Detector => OutcomeTaxonomy::WrongObject,
        StageKind::Segmenter => OutcomeTaxonomy::WrongPart,
        StageKind::GraspGenerator | StageKind::Transport => OutcomeTaxonomy::GraspNotOnObject,
    }
}

/// Oracle stages for a library, each wrapped by any matching faults.
pub fn oracle_stages(
    library: &Arc<OracleLibrary>,
    config: &PipelineConfig,
    faults: &[Fault],
) -> (Arc<dyn DetectorStage>, Arc<dyn SegmenterStage>, Arc<dyn GraspStage>) {
    let mut detector: Arc<dyn DetectorStage> = Arc::new(OracleDetector::new(library.clone()));
    let mut segmenter: Arc<dyn SegmenterStage> = Arc::new(OracleSegmenter::new(library.clone()));
    let mut grasper: Arc<dyn GraspStage> = Arc::new(AnalyticGraspStage::new(config.gripper, config.grasp));
    for fault in faults {
        match fault.stage() {
            StageKind::Detector => detector = Arc::new(FaultyDetector::new(detector, *fault, library.clone())),
            StageKind::Segmenter => segmenter = Arc::new(FaultySegmenter::new(segmenter, *fault)),
            StageKind::GraspGenerator | StageKind::Transport => grasper = Arc::new(FaultyGrasper::new(grasper, *fault)),
        }
    }
    (detector, segmenter, grasper)
}

pub fn grasp_request(generated: &GeneratedScene) -> GraspRequest {
    GraspRequest::new(
        generated.render.rgb.clone(),
        generated.render.depth.clone(),
        generated.scene.intrinsics,
        PromptPair::new(&generated.object_query, &generated.part).expect("generated prompts are non-empty"),
        generated.scene.camera_pose,
    )
    .expect("rendered layers share dims")
}

/// Run one generated scene through oracle stages with `faults` applied.
pub fn run_sim_trial(generated: &GeneratedScene, faults: &[Fault], config: &PipelineConfig) -> TrialOutcome {
    let library = Arc::new(OracleLibrary::new());
    let frame = GtFrame::new(generated.scene.clone(), generated.render.clone());
    let part_index = generated.scene.objects[generated.target]
        .part_index(&generated.part)
        .expect("target part exists");
    let truth = frame.part_mask_full(generated.target, part_index);
    library.register(frame);
    let (detector, segmenter, grasper) = oracle_stages(&library, config, faults);
    let request = grasp_request(generated);
    match run_pipeline(&request, detector.as_ref(), segmenter.as_ref(), grasper.as_ref(), config) {
        Ok(result) => {
            let verdict = classify_sim_trial(
                &result.plan,
                &generated.scene,
                &generated.object_query,
                &generated.part,
                &config.classifier,
            );
            let offset = project(&result.selected.midpoint(), &generated.scene.intrinsics)
                .ok()
                .and_then(|(u, v)| {
                    let (u, v) = (u.round() as i64, v.round() as i64);
                    (0..=MIDPOINT_SEARCH_PX).find(|&r| truth.near_set(u, v, r))
                });
            TrialOutcome {
                outcome: verdict.outcome,
                verdict: Some(verdict),
                failure: None,
                midpoint_in_part: Some(offset == Some(0)),
                midpoint_offset_px: offset,
                timings: Some(result.timings),
            }
        }
        Err(e) => TrialOutcome {
            outcome: failure_outcome(e.stage()),
            verdict: None,
            failure: Some(e.0),
            midpoint_in_part: None,
            midpoint_offset_px: None,
            timings: None,
        },
    }
}

/// Run every trial of a campaign. Trials are independent and run in parallel; results come
/// back in index order.
pub fn run_campaign(spec: &CampaignSpec, config: &PipelineConfig) -> Result<Vec<SimTrial>, SimError> {
    (0..spec.scenes)
        .into_par_iter()
        .map(|index| {
            let seed = trial_seed(spec.seed, index);
            let generated = generate_scene(seed, &spec.request(index), &spec.rig)?;
            let faults = spec.faults.draw(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xFA17));
            let result = run_sim_trial(&generated, &faults, config);
            Ok(SimTrial {
                index,
                seed,
                object_name: generated.scene.objects[generated.target].name.clone(),
                object_query: generated.object_query.clone(),
                part: generated.part.clone(),
                objects: generated.scene.objects.len(),
                orientation_index: (spec.objects == 1).then_some(generated.orientation_index),
                visibility: generated.visibility,
                faults,
                result,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fault_plan_text() {
        let plan: FaultPlan = "wrong_object:0.1; mask_shift(5,0) depth_bias(-0.02):0.5".parse().unwrap();
        assert_eq!(
            plan.entries,
            vec![
                (Fault::WrongObject, 0.1),
                (Fault::MaskShift(5, 0), 1.0),
                (Fault::DepthBias(-0.02), 0.5)
            ]
        );
        assert!("wrong_object:1.5".parse::<FaultPlan>().is_err());
        assert!("nonsense".parse::<FaultPlan>().is_err());
        assert_eq!("".parse::<FaultPlan>().unwrap(), FaultPlan::none());
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn failure_mapping() {
        assert_eq!(failure_outcome(StageKind::Detector), OutcomeTaxonomy::WrongObject);
        assert_eq!(failure_outcome(StageKind::Segmenter), OutcomeTaxonomy::WrongPart);
        assert_eq!(failure_outcome(StageKind::GraspGenerator), OutcomeTaxonomy::GraspNotOnObject);
    }
}
