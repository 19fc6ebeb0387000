use nalgebra::{Matrix3, Quaternion, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

/// Frame a pose is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    Camera,
    World,
}

/// Rigid transform with a frame tag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose6Dof {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub frame: Frame,
}

impl Pose6Dof {
    pub fn identity(frame: Frame) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            frame,
        }
    }

    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>, frame: Frame) -> Self {
        Self {
            rotation,
            translation,
            frame,
        }
    }

    pub fn from_translation(t: Vector3<f64>, frame: Frame) -> Self {
        Self::new(UnitQuaternion::identity(), t, frame)
    }

    /// Build from a `(w, x, y, z)` quaternion, normalizing it.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3], frame: Frame) -> Self {
        let rotation = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]));
        Self::new(rotation, Vector3::from(t), frame)
    }

    /// Build from a `(w, x, y, z)` quaternion taken verbatim (already unit length).
    pub fn from_wxyz_unchecked(q: [f64; 4], t: [f64; 3], frame: Frame) -> Self {
        let rotation = UnitQuaternion::new_unchecked(Quaternion::new(q[0], q[1], q[2], q[3]));
        Self::new(rotation, Vector3::from(t), frame)
    }

    /// Build from orthonormal frame axes (columns of the rotation matrix).
    pub fn from_axes(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>, t: Vector3<f64>, frame: Frame) -> Self {
        let m = Matrix3::from_columns(&[x, y, z]);
        let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m));
        Self::new(rotation, t, frame)
    }

    pub fn wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    pub fn xyz(&self) -> [f64; 3] {
        [self.translation.x, self.translation.y, self.translation.z]
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::x()
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::y()
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.rotation * Vector3::z()
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Inverse transform. The frame tag is kept as is.
    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self::new(rotation, -(rotation * self.translation), self.frame)
    }

    /// `self ∘ other`: apply `other` first, then `self`. Result carries `self`'s frame.
    pub fn compose(&self, other: &Pose6Dof) -> Self {
        compose_pose(self, other)
    }

    /// Pose of a camera at `eye` looking at `target`, with image "up" as close to `up` as possible.
    pub fn look_at(eye: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>, frame: Frame) -> Self {
        let z = (target - eye).normalize();
        // image +y is down
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vector3::x());
        }
        let x = x.normalize();
        let y = z.cross(&x);
        Self::from_axes(x, y, z, eye, frame)
    }
}

/// Rigid composition `a ∘ b` (a maps B→A, b maps C→B); the quaternion is renormalized.
pub fn compose_pose(a: &Pose6Dof, b: &Pose6Dof) -> Pose6Dof {
    let rotation = UnitQuaternion::from_quaternion(*(a.rotation * b.rotation).quaternion());
    Pose6Dof::new(rotation, a.rotation * b.translation + a.translation, a.frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn quat_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
        // q and -q are the same rotation
        let (qa, qb) = (a.quaternion(), b.quaternion());
        (qa - qb).norm().min((qa + qb).norm())
    }

    #[test]
    fn identity_is_neutral() {
        let p = Pose6Dof::from_wxyz([0.9, 0.1, -0.3, 0.2], [0.1, 0.2, 0.3], Frame::World);
        let out = compose_pose(&Pose6Dof::identity(Frame::World), &p);
        assert!(quat_distance(&out.rotation, &p.rotation) < 1e-12);
        assert!((out.translation - p.translation).norm() < 1e-12);
    }

    #[test]
    fn translations_add() {
        let a = Pose6Dof::from_translation(Vector3::new(0.0, 0.0, 1.0), Frame::World);
        let b = Pose6Dof::from_translation(Vector3::new(0.0, 0.0, 2.0), Frame::World);
        assert_eq!(compose_pose(&a, &b).translation, Vector3::new(0.0, 0.0, 3.0));
    }

    #[test]
    fn rotation_then_translation_matches_matrix_oracle() {
        let rz = Pose6Dof::new(
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_2),
            Vector3::zeros(),
            Frame::World,
        );
        let tx = Pose6Dof::from_translation(Vector3::new(1.0, 0.0, 0.0), Frame::World);
        let out = compose_pose(&rz, &tx);
        // homogeneous matrix product computed by hand: [R 0; 0 1] * [I t; 0 1] = [R Rt; 0 1]
        let r = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        let expected_t = r * Vector3::new(1.0, 0.0, 0.0);
        assert!((out.translation - expected_t).norm() < 1e-12);
        assert!((out.translation - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert!(quat_distance(&out.rotation, &rz.rotation) < 1e-12);
    }

    #[test]
    fn look_at_points_z_at_target() {
        let eye = Vector3::new(0.0, -0.4, 0.4);
        let target = Vector3::new(0.0, 0.0, 0.0);
        let pose = Pose6Dof::look_at(eye, target, Vector3::z(), Frame::World);
        let z = pose.z_axis();
        assert!((z - (target - eye).normalize()).norm() < 1e-12);
        // image down points toward world down
        assert!(pose.y_axis().z < 0.0);
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(
            w in -1.0f64..1.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0,
            tx in -2.0f64..2.0, ty in -2.0f64..2.0, tz in -2.0f64..2.0,
        ) {
            prop_assume!((w * w + x * x + y * y + z * z) > 1e-3);
            let p = Pose6Dof::from_wxyz([w, x, y, z], [tx, ty, tz], Frame::World);
            let id = compose_pose(&p, &p.inverse());
            prop_assert!(id.translation.norm() < 1e-9);
            prop_assert!(quat_distance(&id.rotation, &UnitQuaternion::identity()) < 1e-9);
            prop_assert!((id.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
