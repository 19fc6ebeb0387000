//! Household object templates built from primitives. Dimensions in meters; each object
//! frame has z up and its origin on the supporting surface.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{UnitQuaternion, Vector3};

use super::scene::{ObjectSpec, PartSpec};
use super::shapes::{PrimitiveShape, ShapeKind};
use crate::geometry::{Frame, Pose6Dof};

#[derive(Debug, Clone)]
pub struct Template {
    pub name: &'static str,
    /// Color tags the generator may pick from.
    pub colors: &'static [&'static str],
    /// Parts a trial may target; every one is thin enough for a parallel gripper.
    pub targets: &'static [&'static str],
    pub parts: Vec<PartSpec>,
}

impl Template {
    /// Heading of a target part in the object frame (radians about z), from the object
    /// origin to the part frame.
    pub fn facing(&self, part: &str) -> f64 {
        let p = self
            .parts
            .iter()
            .find(|p| p.name == part)
            .map(|p| p.shape.local_pose.translation)
            .unwrap_or_else(Vector3::zeros);
        if p.x.hypot(p.y) < 1e-9 {
            0.0
        } else {
            p.y.atan2(p.x)
        }
    }

    pub fn instantiate(&self, color: &str, position: Vector3<f64>, yaw: f64) -> ObjectSpec {
        ObjectSpec {
            name: self.name.to_string(),
            tags: vec![color.to_string()],
            parts: self.parts.clone(),
            pose: Pose6Dof::new(
                UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
                position,
                Frame::World,
            ),
        }
    }
}

fn part(name: &str, kind: ShapeKind, t: [f64; 3], rotation: UnitQuaternion<f64>) -> PartSpec {
    PartSpec {
        name: name.to_string(),
        shape: PrimitiveShape {
            kind,
            local_pose: Pose6Dof::new(rotation, Vector3::from(t), Frame::World),
        },
    }
}

fn upright() -> UnitQuaternion<f64> {
    UnitQuaternion::identity()
}

/// Cylinder axis (local z) laid along the object's x axis.
fn lying() -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::y_axis(), FRAC_PI_2)
}

fn cylinder(radius: f64, half_height: f64) -> ShapeKind {
    ShapeKind::Cylinder { radius, half_height }
}

pub fn catalog() -> Vec<Template> {
    vec![
        Template {
            name: "mug",
            colors: &["red", "green", "blue", "white", "yellow"],
            targets: &["handle"],
            parts: vec![
                part("body", cylinder(0.035, 0.045), [0.0, 0.0, 0.045], upright()),
                // ring stands vertically, bulging out along +x from the body wall
                part(
                    "handle",
                    ShapeKind::TorusArc {
                        major_radius: 0.03,
                        minor_radius: 0.01,
                        arc_degrees: 180.0,
                    },
                    [0.035, 0.0, 0.045],
                    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2),
                ),
            ],
        },
        Template {
            name: "bottle",
            colors: &["green", "blue", "orange", "purple"],
            targets: &["cap"],
            parts: vec![
                part("body", cylinder(0.03, 0.07), [0.0, 0.0, 0.07], upright()),
                part("cap", cylinder(0.012, 0.012), [0.0, 0.0, 0.152], upright()),
            ],
        },
        Template {
            name: "pan",
            colors: &["black", "red", "blue"],
            targets: &["handle"],
            parts: vec![
                part("bowl", cylinder(0.06, 0.025), [0.0, 0.0, 0.025], upright()),
                part("handle", cylinder(0.011, 0.055), [0.115, 0.0, 0.03], lying()),
            ],
        },
        Template {
            name: "spoon",
            colors: &["wooden", "white", "orange"],
            targets: &["handle"],
            parts: vec![
                part("handle", cylinder(0.012, 0.07), [0.0, 0.0, 0.012], lying()),
                part("head", ShapeKind::Sphere { radius: 0.02 }, [-0.09, 0.0, 0.02], upright()),
            ],
        },
        Template {
            name: "screwdriver",
            colors: &["yellow", "red", "blue", "orange"],
            targets: &["handle"],
            parts: vec![
                part("handle", cylinder(0.013, 0.045), [0.0, 0.0, 0.013], lying()),
                part("shaft", cylinder(0.004, 0.05), [-0.095, 0.0, 0.013], lying()),
            ],
        },
        Template {
            name: "marker",
            colors: &["black", "red", "blue", "green", "pink"],
            targets: &["cap", "body"],
            parts: vec![
                part("body", cylinder(0.011, 0.055), [0.0, 0.0, 0.011], lying()),
                part("cap", cylinder(0.012, 0.02), [0.075, 0.0, 0.012], lying()),
            ],
        },
    ]
}

pub fn template(name: &str) -> Option<Template> {
    catalog().into_iter().find(|t| t.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_are_valid() {
        for t in catalog() {
            assert!(!t.targets.is_empty());
            for target in t.targets {
                assert!(t.parts.iter().any(|p| p.name == *target), "{} lacks {target}", t.name);
            }
            for p in &t.parts {
                p.shape.kind.validate().unwrap();
            }
            let obj = t.instantiate(t.colors[0], Vector3::zeros(), 0.0);
            let (_, r) = obj.bounding_sphere();
            assert!(r < 0.16, "{} is too large: {r}", t.name);
        }
    }

    #[test]
    fn mug_handle_faces_plus_x_and_stands_upright() {
        let mug = template("mug").unwrap();
        assert_eq!(mug.facing("handle"), 0.0);
        let obj = mug.instantiate("red", Vector3::zeros(), 0.0);
        let handle = obj.part_pose(1);
        // the arc's mid point sits outside the body wall at mid height
        let outer = handle.transform_point(&Vector3::new(0.03, 0.0, 0.0));
        assert!((outer - Vector3::new(0.065, 0.0, 0.045)).norm() < 1e-12);
        let end = handle.transform_point(&Vector3::new(0.0, 0.03, 0.0));
        assert!((end - Vector3::new(0.035, 0.0, 0.075)).norm() < 1e-12);
    }
}
