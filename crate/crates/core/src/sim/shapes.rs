//! Analytic primitives in their local frames: ray hits and exact surface distance.
//!
//! Local conventions: boxes and spheres are centered at the origin; cylinders run along
//! local z; a torus arc lies in the local x-y plane, centered on the origin, with the arc
//! symmetric about +x and rounded (spherical) ends.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::Pose6Dof;

const TRACE_STEPS: usize = 128;
const TRACE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Box { half_extents: [f64; 3] },
    Cylinder { radius: f64, half_height: f64 },
    Sphere { radius: f64 },
    TorusArc { major_radius: f64, minor_radius: f64, arc_degrees: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrimitiveShape {
    pub kind: ShapeKind,
    /// Primitive frame relative to its object.
    pub local_pose: Pose6Dof,
}

impl ShapeKind {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            ShapeKind::Box { half_extents } => half_extents.iter().all(|h| *h > 0.0),
            ShapeKind::Cylinder { radius, half_height } => radius > 0.0 && half_height > 0.0,
            ShapeKind::Sphere { radius } => radius > 0.0,
            ShapeKind::TorusArc {
                major_radius,
                minor_radius,
                arc_degrees,
            } => {
                major_radius > 0.0
                    && minor_radius > 0.0
                    && minor_radius < major_radius
                    && arc_degrees > 0.0
                    && arc_degrees <= 360.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("invalid primitive {self:?}"))
        }
    }

    /// Sphere enclosing the primitive, in local coordinates.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        match *self {
            ShapeKind::Box { half_extents } => (Vector3::zeros(), Vector3::from(half_extents).norm()),
            ShapeKind::Cylinder { radius, half_height } => (Vector3::zeros(), radius.hypot(half_height)),
            ShapeKind::Sphere { radius } => (Vector3::zeros(), radius),
            ShapeKind::TorusArc {
                major_radius,
                minor_radius,
                ..
            } => (Vector3::zeros(), major_radius + minor_radius),
        }
    }

    /// Signed distance; exact for every kind.
    pub fn signed_distance(&self, p: &Vector3<f64>) -> f64 {
        match *self {
            ShapeKind::Box { half_extents } => {
                let q = p.abs() - Vector3::from(half_extents);
                q.map(|c| c.max(0.0)).norm() + q.max().min(0.0)
            }
            ShapeKind::Cylinder { radius, half_height } => {
                let d = (p.x.hypot(p.y) - radius, p.z.abs() - half_height);
                d.0.max(d.1).min(0.0) + d.0.max(0.0).hypot(d.1.max(0.0))
            }
            ShapeKind::Sphere { radius } => p.norm() - radius,
            ShapeKind::TorusArc {
                major_radius,
                minor_radius,
                arc_degrees,
            } => (p - arc_closest_point(p, major_radius, arc_degrees)).norm() - minor_radius,
        }
    }

    pub fn surface_distance(&self, p: &Vector3<f64>) -> f64 {
        self.signed_distance(p).abs()
    }

    /// Nearest ray parameter `t > 0` where `origin + t * dir` meets the surface.
    /// `dir` need not be unit length; `t` is in units of `dir`.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        match *self {
            ShapeKind::Box { half_extents } => intersect_box(origin, dir, &Vector3::from(half_extents)),
            ShapeKind::Sphere { radius } => {
                let (t0, t1) = solve_quadratic(dir.dot(dir), 2.0 * origin.dot(dir), origin.dot(origin) - radius * radius)?;
                first_positive(t0, t1)
            }
            ShapeKind::Cylinder { radius, half_height } => intersect_cylinder(origin, dir, radius, half_height),
            ShapeKind::TorusArc { .. } => self.trace(origin, dir),
        }
    }

    fn trace(&self, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let len = dir.norm();
        let unit = dir / len;
        let (center, radius) = self.bounding_sphere();
        let oc = origin - center;
        let (t_enter, t_exit) = solve_quadratic(1.0, 2.0 * oc.dot(&unit), oc.dot(&oc) - radius * radius)?;
        if t_exit <= 0.0 {
            return None;
        }
        let mut t = t_enter.max(0.0);
        for _ in 0..TRACE_STEPS {
            let d = self.signed_distance(&(origin + unit * t));
            if d < TRACE_EPSILON {
                return Some(t / len);
            }
            t += d;
            if t > t_exit {
                return None;
            }
        }
        None
    }
}

/// Closest point to `p` on a centerline arc of radius `major` in the x-y plane.
fn arc_closest_point(p: &Vector3<f64>, major: f64, arc_degrees: f64) -> Vector3<f64> {
    let half = arc_degrees.to_radians() / 2.0;
    let mut phi = p.y.atan2(p.x);
    if p.x == 0.0 && p.y == 0.0 {
        phi = 0.0;
    }
    if arc_degrees < 360.0 && phi.abs() > half {
        phi = half.copysign(phi);
    }
    Vector3::new(major * phi.cos(), major * phi.sin(), 0.0)
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Option<(f64, f64)> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let s = disc.sqrt();
    // numerically stable form
    let q = -0.5 * (b + s.copysign(b));
    let (r0, r1) = if q == 0.0 { (0.0, 0.0) } else { (q / a, c / q) };
    Some((r0.min(r1), r0.max(r1)))
}

fn first_positive(t0: f64, t1: f64) -> Option<f64> {
    if t0 > 0.0 {
        Some(t0)
    } else if t1 > 0.0 {
        Some(t1)
    } else {
        None
    }
}

fn intersect_box(origin: &Vector3<f64>, dir: &Vector3<f64>, half: &Vector3<f64>) -> Option<f64> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        if dir[axis] == 0.0 {
            if origin[axis].abs() > half[axis] {
                return None;
            }
            continue;
        }
        let t0 = (-half[axis] - origin[axis]) / dir[axis];
        let t1 = (half[axis] - origin[axis]) / dir[axis];
        t_near = t_near.max(t0.min(t1));
        t_far = t_far.min(t0.max(t1));
    }
    if t_near > t_far {
        return None;
    }
    first_positive(t_near, t_far)
}

fn intersect_cylinder(origin: &Vector3<f64>, dir: &Vector3<f64>, radius: f64, half_height: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    let a = dir.x * dir.x + dir.y * dir.y;
    if let Some((t0, t1)) = solve_quadratic(
        a,
        2.0 * (origin.x * dir.x + origin.y * dir.y),
        origin.x * origin.x + origin.y * origin.y - radius * radius,
    ) {
        for t in [t0, t1] {
            if t > 0.0 && (origin.z + t * dir.z).abs() <= half_height {
                best = best.min(t);
            }
        }
    }
    if dir.z != 0.0 {
        for cap in [-half_height, half_height] {
            let t = (cap - origin.z) / dir.z;
            let (x, y) = (origin.x + t * dir.x, origin.y + t * dir.y);
            if t > 0.0 && x * x + y * y <= radius * radius {
                best = best.min(t);
            }
        }
    }
    best.is_finite().then_some(best)
}
