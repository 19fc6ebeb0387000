//! Deterministic stage corruption for attribution experiments.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::oracle::OracleLibrary;
use crate::geometry::{BinaryMask, CameraIntrinsics, DepthImage, ImageRgb};
use crate::grasp::GraspProposal;
use crate::pipeline::{
    Detection, DetectorStage, GraspStage, SegmenterStage, Segmentation, StageError, StageKind,
};

/// Text form: `wrong_object`, `mask_dilate(r)`, `mask_erode(r)`, `mask_shift(dx,dy)`,
/// `depth_bias(m)`, `drop_output(detector|segmenter|grasp)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fault {
    /// Detector answers for the object whose label follows the queried one (wrapping).
    WrongObject,
    MaskDilate(u32),
    MaskErode(u32),
    MaskShift(i32, i32),
    /// Every proposal moves this far along its approach axis, meters.
    DepthBias(f64),
    DropOutput(StageKind),
}

impl Fault {
    /// The stage this fault corrupts.
    pub fn stage(&self) -> StageKind {
        match self {
            Fault::WrongObject => StageKind::Detector,
            Fault::MaskDilate(_) | Fault::MaskErode(_) | Fault::MaskShift(..) => StageKind::Segmenter,
            Fault::DepthBias(_) => StageKind::GraspGenerator,
            Fault::DropOutput(stage) => *stage,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Fault::WrongObject => "wrong_object",
            Fault::MaskDilate(_) => "mask_dilate",
            Fault::MaskErode(_) => "mask_erode",
            Fault::MaskShift(..) => "mask_shift",
            Fault::DepthBias(_) => "depth_bias",
            Fault::DropOutput(_) => "drop_output",
        }
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::WrongObject => write!(f, "wrong_object"),
            Fault::MaskDilate(r) => write!(f, "mask_dilate({r})"),
            Fault::MaskErode(r) => write!(f, "mask_erode({r})"),
            Fault::MaskShift(dx, dy) => write!(f, "mask_shift({dx},{dy})"),
            Fault::DepthBias(m) => write!(f, "depth_bias({m})"),
            Fault::DropOutput(stage) => write!(f, "drop_output({})", stage_token(*stage)),
        }
    }
}

fn stage_token(stage: StageKind) -> &'static str {
    match stage {
        StageKind::Detector => "detector",
        StageKind::Segmenter => "segmenter",
        StageKind::GraspGenerator | StageKind::Transport => "grasp",
    }
}

impl FromStr for Fault {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) if s.ends_with(')') => (&s[..open], Some(&s[open + 1..s.len() - 1])),
            Some(_) => return Err(format!("unbalanced parentheses in fault {s:?}")),
            None => (s, None),
        };
        let args: Vec<&str> = args
            .map(|a| a.split(',').map(str::trim).collect())
            .unwrap_or_default();
        let bad = |what: &str| format!("fault {s:?}: {what}");
        let int = |a: &str| a.parse::<i32>().map_err(|_| bad("expected an integer"));
        let radius = |args: &[&str]| match args {
            [r] => r.parse::<u32>().map_err(|_| bad("radius must be a non-negative integer")),
            _ => Err(bad("expected one radius argument")),
        };
        match name.trim() {
            "wrong_object" if args.is_empty() => Ok(Fault::WrongObject),
            "mask_dilate" => Ok(Fault::MaskDilate(radius(&args)?)),
            "mask_erode" => Ok(Fault::MaskErode(radius(&args)?)),
            "mask_shift" => match args.as_slice() {
                [dx, dy] => Ok(Fault::MaskShift(int(dx)?, int(dy)?)),
                _ => Err(bad("expected (dx,dy)")),
            },
            "depth_bias" => match args.as_slice() {
                [m] => m
                    .parse::<f64>()
                    .ok()
                    .filter(|m| m.is_finite())
                    .map(Fault::DepthBias)
                    .ok_or_else(|| bad("expected a finite offset in meters")),
                _ => Err(bad("expected one offset")),
            },
            "drop_output" => match args.as_slice() {
                [] | ["detector"] => Ok(Fault::DropOutput(StageKind::Detector)),
                ["segmenter"] => Ok(Fault::DropOutput(StageKind::Segmenter)),
                ["grasp"] => Ok(Fault::DropOutput(StageKind::GraspGenerator)),
                _ => Err(bad("stage must be detector, segmenter or grasp")),
            },
            _ => Err(format!("unknown fault {s:?}")),
        }
    }
}

pub struct FaultyDetector {
    inner: Arc<dyn DetectorStage>,
    fault: Fault,
    library: Arc<OracleLibrary>,
}

impl FaultyDetector {
    /// `library` supplies the scene labels `WrongObject` needs.
    pub fn new(inner: Arc<dyn DetectorStage>, fault: Fault, library: Arc<OracleLibrary>) -> Self {
        Self { inner, fault, library }
    }
}

impl DetectorStage for FaultyDetector {
    fn name(&self) -> &str {
        "faulty"
    }

    fn detect(&self, image: &ImageRgb, object_text: &str, threshold: f64) -> Result<Detection, StageError> {
        match self.fault {
            Fault::WrongObject => {
                let frame = self
                    .library
                    .frame(image)
                    .ok_or_else(|| StageError::BadRequest("image is not a registered oracle frame".into()))?;
                let mut labels: Vec<String> = frame.scene.objects.iter().map(|o| o.label()).collect();
                labels.sort();
                let pos = frame
                    .resolve(object_text)
                    .map(|o| frame.scene.objects[o].label())
                    .ok()
                    .and_then(|l| labels.iter().position(|x| *x == l));
                match pos {
                    Some(i) if labels.len() > 1 => {
                        self.inner.detect(image, &labels[(i + 1) % labels.len()], threshold)
                    }
                    _ => self.inner.detect(image, object_text, threshold),
                }
            }
            Fault::DropOutput(StageKind::Detector) => Err(StageError::NotFound("output dropped".into())),
            _ => self.inner.detect(image, object_text, threshold),
        }
    }
}

pub struct FaultySegmenter {
    inner: Arc<dyn SegmenterStage>,
    fault: Fault,
}

impl FaultySegmenter {
    pub fn new(inner: Arc<dyn SegmenterStage>, fault: Fault) -> Self {
        Self { inner, fault }
    }
}

impl SegmenterStage for FaultySegmenter {
    fn name(&self) -> &str {
        "faulty"
    }

    fn segment(&self, image: &ImageRgb, part_text: &str) -> Result<Segmentation, StageError> {
        let mut out = self.inner.segment(image, part_text)?;
        out.mask = match self.fault {
            Fault::MaskDilate(r) => out.mask.dilated(r),
            Fault::MaskErode(r) => out.mask.eroded(r),
            Fault::MaskShift(dx, dy) => out.mask.shifted(dx, dy),
            Fault::DropOutput(StageKind::Segmenter) => BinaryMask::new(out.mask.width(), out.mask.height()),
            _ => out.mask,
        };
        Ok(out)
    }
}

pub struct FaultyGrasper {
    inner: Arc<dyn GraspStage>,
    fault: Fault,
}

impl FaultyGrasper {
    pub fn new(inner: Arc<dyn GraspStage>, fault: Fault) -> Self {
        Self { inner, fault }
    }
}

impl GraspStage for FaultyGrasper {
    fn name(&self) -> &str {
        "faulty"
    }

    fn propose(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        mask: &BinaryMask,
    ) -> Result<Vec<GraspProposal>, StageError> {
        let proposals = self.inner.propose(depth, intrinsics, mask)?;
        Ok(match self.fault {
            Fault::DepthBias(m) => proposals.iter().map(|g| g.shifted_along_approach(m)).collect(),
            Fault::DropOutput(StageKind::GraspGenerator) => Vec::new(),
            _ => proposals,
        })
    }
}
