//! Seeded random scenes: a target object posed at one of five 45° headings, plus
//! optional distractors placed by bounding-sphere rejection sampling.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::catalog::{catalog, Template};
use super::render::{raycast_render, raycast_render_subset, RenderOutput};
use super::scene::{ObjectSpec, SceneSpec};
use super::SimError;
use crate::geometry::{CameraIntrinsics, Frame, Pose6Dof};

/// Fixed viewpoint looking down at the table center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraRig {
    pub width: u32,
    pub height: u32,
    /// fx = fy, pixels.
    pub focal: f64,
    /// Eye to look-at point, meters.
    pub distance: f64,
    pub elevation_deg: f64,
    pub look_at: [f64; 3],
}

impl Default for CameraRig {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            focal: 800.0,
            distance: 0.5,
            elevation_deg: 45.0,
            look_at: [0.0, 0.0, 0.03],
        }
    }
}

impl CameraRig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.focal,
            fy: self.focal,
            cx: f64::from(self.width) / 2.0,
            cy: f64::from(self.height) / 2.0,
        }
    }

    pub fn eye(&self) -> Vector3<f64> {
        let e = self.elevation_deg.to_radians();
        Vector3::from(self.look_at) + self.distance * Vector3::new(0.0, -e.cos(), e.sin())
    }

    /// Camera-to-world transform.
    pub fn pose(&self) -> Pose6Dof {
        Pose6Dof::look_at(self.eye(), Vector3::from(self.look_at), Vector3::z(), Frame::World)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneRequest {
    /// 1 to 5 objects; the first placed is the target.
    pub objects: usize,
    /// Target heading step (0..5); random when `None`.
    pub orientation_index: Option<u8>,
    /// Restrict distractors to templates that also have the target part.
    pub shared_part: bool,
    /// Also turn every distractor's copy of the target part toward the camera and require it
    /// to be unoccluded.
    pub all_parts_visible: bool,
}

impl SceneRequest {
    pub fn single(orientation_index: u8) -> Self {
        Self {
            objects: 1,
            orientation_index: Some(orientation_index),
            shared_part: false,
            all_parts_visible: false,
        }
    }

    pub fn cluttered(objects: usize) -> Self {
        Self {
            objects,
            orientation_index: None,
            shared_part: false,
            all_parts_visible: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub seed: u64,
    pub scene: SceneSpec,
    pub render: RenderOutput,
    /// Index of the target object in `scene.objects`.
    pub target: usize,
    pub object_query: String,
    pub part: String,
    pub orientation_index: u8,
    /// Visible share of the target part's unobstructed pixels.
    pub visibility: f64,
}

const MAX_LAYOUTS: usize = 400;
const MAX_PLACEMENTS: usize = 200;
/// Minimum visible share for a part to count as unoccluded.
pub const UNOCCLUDED: f64 = 0.95;

fn heading_to_camera(rig: &CameraRig, at: &Vector3<f64>) -> f64 {
    let eye = rig.eye();
    (eye.y - at.y).atan2(eye.x - at.x)
}

fn part_pixels(render: &RenderOutput, object: usize, part: usize) -> usize {
    render
        .part_map
        .iter()
        .filter(|p| **p == Some((object as u16, part as u16)))
        .count()
}

fn touches_border(render: &RenderOutput, object: usize) -> bool {
    let (w, h) = (render.width(), render.height());
    let edge = |u: u32, v: u32| render.instance_at(u, v) == Some(object);
    (0..w).any(|u| edge(u, 0) || edge(u, h - 1)) || (0..h).any(|v| edge(0, v) || edge(w - 1, v))
}

fn visibility(full: &RenderOutput, scene: &SceneSpec, object: usize, part: usize) -> f64 {
    let alone = raycast_render_subset(scene, Some(&[object]));
    let unobstructed = part_pixels(&alone, object, part);
    if unobstructed == 0 {
        return 0.0;
    }
    part_pixels(full, object, part) as f64 / unobstructed as f64
}

/// Yaw that turns `part` of `template` to heading step `k` relative to the camera.
fn posed_yaw(rig: &CameraRig, template: &Template, part: &str, at: &Vector3<f64>, k: u8) -> f64 {
    heading_to_camera(rig, at) + (-90.0 + 45.0 * f64::from(k)).to_radians() - template.facing(part)
}

/// `facing_part` turns each distractor's copy of that part toward the camera half-space.
fn place_distractors(
    rng: &mut ChaCha8Rng,
    rig: &CameraRig,
    pool: &[Template],
    placed: &mut Vec<ObjectSpec>,
    count: usize,
    facing_part: Option<&str>,
) -> bool {
    for _ in 0..count {
        let mut ok = false;
        for _ in 0..MAX_PLACEMENTS {
            let t = pool.choose(rng).expect("non-empty pool");
            let color = *t.colors.choose(rng).expect("template has colors");
            if placed.iter().any(|o| o.name == t.name && o.tags[0] == color) {
                continue;
            }
            let at = Vector3::new(rng.gen_range(-0.14..0.14), rng.gen_range(-0.11..0.13), 0.0);
            let yaw = match facing_part {
                Some(part) if t.parts.iter().any(|p| p.name == part) => {
                    posed_yaw(rig, t, part, &at, rng.gen_range(0..5))
                }
                _ => rng.gen_range(-PI..PI),
            };
            let obj = t.instantiate(color, at, yaw);
            let (c, r) = obj.bounding_sphere();
            if placed.iter().all(|o| {
                let (oc, or) = o.bounding_sphere();
                (oc - c).norm() >= or + r
            }) {
                placed.push(obj);
                ok = true;
                break;
            }
        }
        if !ok {
            return false;
        }
    }
    true
}

/// Deterministic scene for `seed`. Layouts where an object leaves the image or the target
/// part is occluded are redrawn from the same random stream.
pub fn generate_scene(seed: u64, request: &SceneRequest, rig: &CameraRig) -> Result<GeneratedScene, SimError> {
    if !(1..=5).contains(&request.objects) {
        return Err(SimError::InvalidScene(format!("object count {} not in 1..=5", request.objects)));
    }
    if request.orientation_index.is_some_and(|k| k > 4) {
        return Err(SimError::InvalidScene("orientation index must be 0..=4".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let templates = catalog();
    for _ in 0..MAX_LAYOUTS {
        let target = templates.choose(&mut rng).expect("catalog is non-empty");
        let part = *target.targets.choose(&mut rng).expect("template has targets");
        let color = *target.colors.choose(&mut rng).expect("template has colors");
        let k = request.orientation_index.unwrap_or_else(|| rng.gen_range(0..5));
        let at = Vector3::new(rng.gen_range(-0.03..0.03), rng.gen_range(-0.03..0.03), 0.0);
        let mut objects = vec![target.instantiate(color, at, posed_yaw(rig, target, part, &at, k))];

        let pool: Vec<Template> = templates
            .iter()
            .filter(|t| !request.shared_part || t.targets.contains(&part))
            .cloned()
            .collect();
        let facing = request.all_parts_visible.then_some(part);
        if !place_distractors(&mut rng, rig, &pool, &mut objects, request.objects - 1, facing) {
            continue;
        }

        let scene = SceneSpec {
            width: rig.width,
            height: rig.height,
            intrinsics: rig.intrinsics(),
            camera_pose: rig.pose(),
            objects,
        };
        if scene.validate().is_err() {
            continue;
        }
        let render = raycast_render(&scene);
        if (0..scene.objects.len()).any(|o| touches_border(&render, o) || !render.instance_map.contains(&Some(o as u16))) {
            continue;
        }
        let part_index = scene.objects[0].part_index(part).expect("target part exists");
        let vis = if scene.objects.len() == 1 {
            1.0
        } else {
            visibility(&render, &scene, 0, part_index)
        };
        if vis < UNOCCLUDED {
            continue;
        }
        if request.all_parts_visible
            && (1..scene.objects.len()).any(|o| {
                scene.objects[o]
                    .part_index(part)
                    .is_some_and(|p| visibility(&render, &scene, o, p) < UNOCCLUDED)
            })
        {
            continue;
        }
        return Ok(GeneratedScene {
            seed,
            object_query: scene.objects[0].label(),
            scene,
            render,
            target: 0,
            part: part.to_string(),
            orientation_index: k,
            visibility: vis,
        });
    }
    Err(SimError::InvalidScene(format!("no valid layout for seed {seed} after {MAX_LAYOUTS} attempts")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;

    #[test]
    fn rig_looks_at_the_table_center() {
        let rig = CameraRig::default();
        let to_camera = rig.pose().inverse();
        let center = to_camera.transform_point(&Vector3::from(rig.look_at));
        let (u, v) = project(&center, &rig.intrinsics()).unwrap();
        assert!((u - 320.0).abs() < 1e-9 && (v - 240.0).abs() < 1e-9);
        assert!((center.z - 0.5).abs() < 1e-12);
        // world +z shows up as image up
        let above = to_camera.transform_point(&(Vector3::from(rig.look_at) + Vector3::z() * 0.05));
        assert!(project(&above, &rig.intrinsics()).unwrap().1 < 240.0);
    }

    #[test]
    fn same_seed_same_scene() {
        let rig = CameraRig::default();
        let a = generate_scene(11, &SceneRequest::cluttered(3), &rig).unwrap();
        let b = generate_scene(11, &SceneRequest::cluttered(3), &rig).unwrap();
        assert_eq!(a.scene, b.scene);
        assert_eq!(a.render, b.render);
        assert_eq!(a.scene.objects.len(), 3);
        a.scene.validate().unwrap();
        assert!(a.visibility >= UNOCCLUDED);
    }

    #[test]
    fn orientation_steps_turn_the_target_part() {
        let rig = CameraRig::default();
        let mut headings = Vec::new();
        for k in 0..5 {
            let g = generate_scene(3, &SceneRequest::single(k), &rig).unwrap();
            let obj = &g.scene.objects[0];
            let template = super::super::catalog::template(&obj.name).unwrap();
            let yaw = obj.pose.rotation.euler_angles().2 + template.facing(&g.part);
            let rel = yaw - heading_to_camera(&rig, &obj.pose.translation);
            headings.push(rel.sin().atan2(rel.cos()).to_degrees());
        }
        for (k, h) in headings.iter().enumerate() {
            assert!((h - (-90.0 + 45.0 * k as f64)).abs() < 1e-6, "{headings:?}");
        }
    }

    #[test]
    fn shared_part_distractors_carry_the_part() {
        let rig = CameraRig::default();
        let req = SceneRequest {
            objects: 3,
            orientation_index: None,
            shared_part: true,
            all_parts_visible: true,
        };
        for seed in 0..4 {
            let g = generate_scene(seed, &req, &rig).unwrap();
            for o in &g.scene.objects {
                assert!(o.part_index(&g.part).is_some(), "{} lacks {}", o.label(), g.part);
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let rig = CameraRig::default();
        assert!(generate_scene(0, &SceneRequest::cluttered(0), &rig).is_err());
        assert!(generate_scene(0, &SceneRequest::cluttered(6), &rig).is_err());
        assert!(generate_scene(0, &SceneRequest::single(5), &rig).is_err());
    }
}
