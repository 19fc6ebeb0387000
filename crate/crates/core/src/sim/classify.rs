//! Geometric outcome of a simulated grasp, standing in for a physical lift test.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::scene::SceneSpec;
use crate::grasp::GraspPlan;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierThresholds {
    /// Contacts farther than this from every surface are off-object, meters.
    pub contact_distance: f64,
    /// Largest tolerated offset along the approach axis, meters.
    pub depth_threshold: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            contact_distance: 0.02,
            depth_threshold: 0.015,
        }
    }
}

/// Trial outcomes. The simulator never produces `GrippersSlipped`, `JointLimitHit` or
/// `CollidedWithTable`; those come from ingested robot logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OutcomeTaxonomy {
    Success,
    GraspDepthIssue,
    GrippersSlipped,
    WrongPart,
    WrongObject,
    GraspNotOnObject,
    JointLimitHit,
    CollidedWithTable,
}

impl OutcomeTaxonomy {
    pub const ALL: [OutcomeTaxonomy; 8] = [
        OutcomeTaxonomy::Success,
        OutcomeTaxonomy::GraspDepthIssue,
        OutcomeTaxonomy::GrippersSlipped,
        OutcomeTaxonomy::WrongPart,
        OutcomeTaxonomy::WrongObject,
        OutcomeTaxonomy::GraspNotOnObject,
        OutcomeTaxonomy::JointLimitHit,
        OutcomeTaxonomy::CollidedWithTable,
    ];

    /// Token used in trial logs.
    pub fn token(&self) -> &'static str {
        match self {
            OutcomeTaxonomy::Success => "Success",
            OutcomeTaxonomy::GraspDepthIssue => "GraspDepthIssue",
            OutcomeTaxonomy::GrippersSlipped => "GrippersSlipped",
            OutcomeTaxonomy::WrongPart => "WrongPart",
            OutcomeTaxonomy::WrongObject => "WrongObject",
            OutcomeTaxonomy::GraspNotOnObject => "GraspNotOnObject",
            OutcomeTaxonomy::JointLimitHit => "JointLimitHit",
            OutcomeTaxonomy::CollidedWithTable => "CollidedWithTable",
        }
    }

    /// Human-readable row label.
    pub fn label(&self) -> &'static str {
        match self {
            OutcomeTaxonomy::Success => "Success",
            OutcomeTaxonomy::GraspDepthIssue => "Grasp depth issue",
            OutcomeTaxonomy::GrippersSlipped => "Grippers slipped",
            OutcomeTaxonomy::WrongPart => "Grabbed wrong part",
            OutcomeTaxonomy::WrongObject => "Grabbed wrong object",
            OutcomeTaxonomy::GraspNotOnObject => "Grasp not on object",
            OutcomeTaxonomy::JointLimitHit => "Joint limit hit",
            OutcomeTaxonomy::CollidedWithTable => "Collided with table",
        }
    }
}

impl fmt::Display for OutcomeTaxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for OutcomeTaxonomy {
    type Err = String;

    /// Accepts the token case-insensitively, with or without `_`, `-` or spaces.
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = |t: &str| {
            t.chars()
                .filter(|c| !matches!(c, '_' | '-' | ' '))
                .collect::<String>()
                .to_lowercase()
        };
        let wanted = norm(s);
        Self::ALL
            .into_iter()
            .find(|o| norm(o.token()) == wanted)
            .ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

/// Classification with the geometry behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub outcome: OutcomeTaxonomy,
    /// `(object, part)` whose surface the settled contacts touch.
    pub touched: Option<(usize, usize)>,
    /// Offset along the approach axis that best seats both contacts, meters.
    pub depth_offset: f64,
    /// Larger contact-to-surface distance at that offset, meters.
    pub contact_error: f64,
}

const SEARCH_HALF_RANGE: f64 = 0.05;
const SEARCH_STEP: f64 = 0.0005;
const SEARCH_TIE: f64 = 1e-12;

struct Surfaces<'a> {
    scene: &'a SceneSpec,
    /// World-to-primitive transform per (object, part).
    frames: Vec<((usize, usize), crate::geometry::Pose6Dof)>,
}

impl<'a> Surfaces<'a> {
    fn new(scene: &'a SceneSpec) -> Self {
        let frames = scene
            .objects
            .iter()
            .enumerate()
            .flat_map(|(o, obj)| (0..obj.parts.len()).map(move |p| ((o, p), obj.part_pose(p).inverse())))
            .collect();
        Self { scene, frames }
    }

    fn distance_to(&self, index: usize, p: &Vector3<f64>) -> f64 {
        let ((o, part), to_local) = &self.frames[index];
        self.scene.objects[*o].parts[*part]
            .shape
            .kind
            .surface_distance(&to_local.transform_point(p))
    }

    fn nearest(&self, p: &Vector3<f64>) -> f64 {
        (0..self.frames.len())
            .map(|i| self.distance_to(i, p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Classify a world-frame plan against the scene, in priority order: off-object contacts,
/// wrong object, wrong part, depth offset beyond threshold, success.
///
/// The depth offset is the shift `s` along the approach axis (searched over ±5 cm in
/// 0.5 mm steps) minimizing the larger of the two contact-to-surface distances; exact ties
/// prefer the smaller `|s|`. Membership is the primitive minimizing the summed contact
/// distances at that shift.
pub fn classify_sim_trial(
    plan: &GraspPlan,
    scene: &SceneSpec,
    target_object: &str,
    target_part: &str,
    thresholds: &ClassifierThresholds,
) -> Verdict {
    let surfaces = Surfaces::new(scene);
    let m = plan.grasp.translation;
    let half = plan.grasp.x_axis() * (plan.opening_width / 2.0);
    let approach = plan.grasp.z_axis();
    let (a, b) = (m - half, m + half);

    let off = Verdict {
        outcome: OutcomeTaxonomy::GraspNotOnObject,
        touched: None,
        depth_offset: 0.0,
        contact_error: surfaces.nearest(&a).max(surfaces.nearest(&b)),
    };
    if surfaces.frames.is_empty()
        || (surfaces.nearest(&a) > thresholds.contact_distance && surfaces.nearest(&b) > thresholds.contact_distance)
    {
        return off;
    }

    let steps = (SEARCH_HALF_RANGE / SEARCH_STEP).round() as i64;
    let samples: Vec<(f64, f64)> = (-steps..=steps)
        .map(|i| {
            let s = i as f64 * SEARCH_STEP;
            let shift = approach * s;
            (s, surfaces.nearest(&(a + shift)).max(surfaces.nearest(&(b + shift))))
        })
        .collect();
    let best = samples.iter().map(|(_, f)| *f).fold(f64::INFINITY, f64::min);
    let (s, err) = samples
        .iter()
        .filter(|(_, f)| *f <= best + SEARCH_TIE)
        .min_by(|x, y| x.0.abs().total_cmp(&y.0.abs()).then(x.0.total_cmp(&y.0)))
        .copied()
        .expect("search grid is non-empty");

    let (sa, sb) = (a + approach * s, b + approach * s);
    let touched = (0..surfaces.frames.len())
        .map(|i| (surfaces.frames[i].0, surfaces.distance_to(i, &sa) + surfaces.distance_to(i, &sb)))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .map(|(key, _)| key)
        .expect("scene has surfaces");

    let target = match scene.find_objects(target_object).as_slice() {
        [one] => Some(*one),
        _ => None,
    };
    let outcome = if Some(touched.0) != target {
        OutcomeTaxonomy::WrongObject
    } else if scene.objects[touched.0].part_index(target_part) != Some(touched.1) {
        OutcomeTaxonomy::WrongPart
    } else if s.abs() > thresholds.depth_threshold {
        OutcomeTaxonomy::GraspDepthIssue
    } else {
        OutcomeTaxonomy::Success
    };
    Verdict {
        outcome,
        touched: Some(touched),
        depth_offset: s,
        contact_error: err,
    }
}
