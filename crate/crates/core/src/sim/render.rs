use nalgebra::Vector3;
use rayon::prelude::*;

use super::palette::{object_color, BACKGROUND};
use super::scene::SceneSpec;
use crate::geometry::{project, DepthImage, Frame, ImageRgb, Pose6Dof};

/// Rendered layers. Maps are row-major; `None` marks background.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub rgb: ImageRgb,
    pub depth: DepthImage,
    pub instance_map: Vec<Option<u16>>,
    /// `(object index, part index)` of the nearest hit.
    pub part_map: Vec<Option<(u16, u16)>>,
}

impl RenderOutput {
    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    pub fn instance_at(&self, u: u32, v: u32) -> Option<usize> {
        self.instance_map[(v * self.width() + u) as usize].map(usize::from)
    }

    pub fn part_at(&self, u: u32, v: u32) -> Option<(usize, usize)> {
        self.part_map[(v * self.width() + u) as usize].map(|(o, p)| (usize::from(o), usize::from(p)))
    }
}

struct Placed {
    object: u16,
    part: u16,
    kind: super::shapes::ShapeKind,
    /// Camera frame to primitive frame.
    to_local: Pose6Dof,
    /// Inclusive pixel rectangle that can contain the primitive.
    rect: (i64, i64, i64, i64),
}

fn screen_rect(center: &Vector3<f64>, radius: f64, scene: &SceneSpec) -> (i64, i64, i64, i64) {
    let full = (0, 0, i64::from(scene.width) - 1, i64::from(scene.height) - 1);
    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    // projected corners of the enclosing cube bound the sphere's image
    for corner in 0..8 {
        let offset = Vector3::new(
            if corner & 1 == 0 { -radius } else { radius },
            if corner & 2 == 0 { -radius } else { radius },
            if corner & 4 == 0 { -radius } else { radius },
        );
        let Ok((u, v)) = project(&(center + offset), &scene.intrinsics) else {
            return full;
        };
        lo = (lo.0.min(u), lo.1.min(v));
        hi = (hi.0.max(u), hi.1.max(v));
    }
    (
        (lo.0.floor() as i64 - 1).max(full.0),
        (lo.1.floor() as i64 - 1).max(full.1),
        (hi.0.ceil() as i64 + 1).min(full.2),
        (hi.1.ceil() as i64 + 1).min(full.3),
    )
}

/// Raycast every pixel against the objects listed in `only` (all objects when `None`).
pub fn raycast_render_subset(scene: &SceneSpec, only: Option<&[usize]>) -> RenderOutput {
    let world_to_camera = scene.camera_pose.inverse();
    let mut placed = Vec::new();
    for (oi, obj) in scene.objects.iter().enumerate() {
        if only.is_some_and(|set| !set.contains(&oi)) {
            continue;
        }
        for (pi, part) in obj.parts.iter().enumerate() {
            let camera_from_part = world_to_camera.compose(&obj.part_pose(pi));
            let (c, r) = part.shape.kind.bounding_sphere();
            let center = camera_from_part.transform_point(&c);
            placed.push(Placed {
                object: oi as u16,
                part: pi as u16,
                kind: part.shape.kind,
                to_local: camera_from_part.inverse(),
                rect: screen_rect(&center, r, scene),
            });
        }
    }

    let (w, h) = (scene.width as usize, scene.height as usize);
    let k = scene.intrinsics;
    let rows: Vec<(Vec<u8>, Vec<f32>, Vec<Option<(u16, u16)>>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut rgb = Vec::with_capacity(w * 3);
            let mut depth = vec![0.0f32; w];
            let mut parts = vec![None; w];
            let active: Vec<&Placed> = placed
                .iter()
                .filter(|p| p.rect.1 <= v as i64 && v as i64 <= p.rect.3)
                .collect();
            for u in 0..w {
                let dir = k.ray(u as f64, v as f64);
                let mut best: Option<(f64, &Placed)> = None;
                for p in &active {
                    if (u as i64) < p.rect.0 || (u as i64) > p.rect.2 {
                        continue;
                    }
                    let origin = p.to_local.translation;
                    let local_dir = p.to_local.transform_vector(&dir);
                    if let Some(t) = p.kind.intersect(&origin, &local_dir) {
                        if best.map_or(true, |(bt, _)| t < bt) {
                            best = Some((t, p));
                        }
                    }
                }
                match best {
                    // the ray has unit z, so t is the camera-frame depth
                    Some((t, p)) => {
                        depth[u] = t as f32;
                        parts[u] = Some((p.object, p.part));
                        rgb.extend_from_slice(&object_color(&scene.objects[p.object as usize], p.part as usize));
                    }
                    None => rgb.extend_from_slice(&BACKGROUND),
                }
            }
            (rgb, depth, parts)
        })
        .collect();

    let mut pixels = Vec::with_capacity(w * h * 3);
    let mut depth = Vec::with_capacity(w * h);
    let mut part_map = Vec::with_capacity(w * h);
    for (r, d, p) in rows {
        pixels.extend(r);
        depth.extend(d);
        part_map.extend(p);
    }
    let instance_map = part_map.iter().map(|p| p.map(|(o, _)| o)).collect();
    RenderOutput {
        rgb: ImageRgb::new(scene.width, scene.height, pixels).expect("buffer sized from dims"),
        depth: DepthImage::new(scene.width, scene.height, depth).expect("finite positive depth"),
        instance_map,
        part_map,
    }
}

pub fn raycast_render(scene: &SceneSpec) -> RenderOutput {
    raycast_render_subset(scene, None)
}

/// World-frame point seen at pixel `(u, v)` with camera depth `d`.
pub fn pixel_to_world(scene: &SceneSpec, u: u32, v: u32, d: f64) -> Vector3<f64> {
    let p = scene.intrinsics.ray(f64::from(u), f64::from(v)) * d;
    debug_assert_eq!(scene.camera_pose.frame, Frame::World);
    scene.camera_pose.transform_point(&p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraIntrinsics;
    use crate::sim::scene::{ObjectSpec, PartSpec};
    use crate::sim::shapes::{PrimitiveShape, ShapeKind};

    fn sphere_at(name: &str, tag: &str, z: f64, radius: f64) -> ObjectSpec {
        ObjectSpec {
            name: name.into(),
            tags: vec![tag.into()],
            parts: vec![PartSpec {
                name: "body".into(),
                shape: PrimitiveShape {
                    kind: ShapeKind::Sphere { radius },
                    local_pose: Pose6Dof::identity(Frame::World),
                },
            }],
            pose: Pose6Dof::from_translation(Vector3::new(0.0, 0.0, z), Frame::World),
        }
    }

    fn scene(objects: Vec<ObjectSpec>) -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 48,
            intrinsics: CameraIntrinsics::new(50.0, 50.0, 32.0, 24.0).unwrap(),
            camera_pose: Pose6Dof::identity(Frame::World),
            objects,
        }
    }

    #[test]
    fn sphere_depth_at_principal_point() {
        let out = raycast_render(&scene(vec![sphere_at("ball", "red", 0.5, 0.1)]));
        assert!((f64::from(out.depth.get(32, 24)) - 0.4).abs() < 1e-6);
        assert_eq!(out.part_at(32, 24), Some((0, 0)));
        assert_eq!(out.part_at(0, 0), None);
        assert_eq!(out.depth.get(0, 0), 0.0);
    }

    #[test]
    fn empty_scene_has_no_depth() {
        let out = raycast_render(&scene(vec![]));
        assert!(out.depth.values().iter().all(|d| *d == 0.0));
        assert!(out.instance_map.iter().all(Option::is_none));
    }

    #[test]
    fn nearest_sphere_wins() {
        // the layout overlaps, which validation would reject; the renderer does not care
        let s = scene(vec![sphere_at("far", "blue", 0.8, 0.2), sphere_at("near", "red", 0.5, 0.1)]);
        let out = raycast_render(&s);
        for v in 0..48 {
            for u in 0..64 {
                let ray = s.intrinsics.ray(f64::from(u), f64::from(v));
                let near = ShapeKind::Sphere { radius: 0.1 }.intersect(&-Vector3::new(0.0, 0.0, 0.5), &ray);
                let far = ShapeKind::Sphere { radius: 0.2 }.intersect(&-Vector3::new(0.0, 0.0, 0.8), &ray);
                let expected = match (near, far) {
                    (Some(_), _) => Some(1),
                    (None, Some(_)) => Some(0),
                    _ => None,
                };
                assert_eq!(out.instance_at(u, v), expected, "pixel {u},{v}");
            }
        }
    }

    #[test]
    fn valid_pixels_lie_on_the_hit_surface() {
        let s = scene(vec![sphere_at("ball", "red", 0.5, 0.1)]);
        let out = raycast_render(&s);
        for v in 0..48 {
            for u in 0..64 {
                let d = f64::from(out.depth.get(u, v));
                if d > 0.0 {
                    let p = pixel_to_world(&s, u, v, d);
                    assert!(((p - Vector3::new(0.0, 0.0, 0.5)).norm() - 0.1).abs() < 1e-4);
                }
            }
        }
    }
}
