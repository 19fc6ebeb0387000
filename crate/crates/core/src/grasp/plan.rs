use nalgebra::Vector3;

use super::{GraspPlan, GraspProposal};
use crate::geometry::{compose_pose, Frame, Pose6Dof};

/// Stand-off of the pre-grasp behind the grasp along the approach axis, meters.
pub const APPROACH_OFFSET: f64 = 0.10;
/// Lift of the post-grasp above the grasp along world up, meters.
pub const LIFT_OFFSET: f64 = 0.10;

/// Waypoints in the world frame (world up = +z).
pub fn build_grasp_plan(grasp: &GraspProposal, camera_to_world: &Pose6Dof) -> GraspPlan {
    let mut world = compose_pose(camera_to_world, &grasp.pose);
    world.frame = Frame::World;
    let pre_grasp = Pose6Dof::new(
        world.rotation,
        world.translation - world.z_axis() * APPROACH_OFFSET,
        Frame::World,
    );
    let post_grasp = Pose6Dof::new(
        world.rotation,
        world.translation + Vector3::z() * LIFT_OFFSET,
        Frame::World,
    );
    GraspPlan {
        pre_grasp,
        grasp: world,
        post_grasp,
        frame: Frame::World,
        opening_width: grasp.opening_width,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, UnitQuaternion};
    use proptest::prelude::*;

    fn at(t: Vector3<f64>, rotation: UnitQuaternion<f64>) -> GraspProposal {
        GraspProposal {
            pose: Pose6Dof::new(rotation, t, Frame::Camera),
            opening_width: 0.03,
            score: 1.0,
            contact_a: t,
            contact_b: t,
        }
    }

    #[test]
    fn identity_world_offsets() {
        let plan = build_grasp_plan(
            &at(Vector3::new(0.4, 0.0, 0.6), UnitQuaternion::identity()),
            &Pose6Dof::identity(Frame::World),
        );
        assert!((plan.pre_grasp.translation - Vector3::new(0.4, 0.0, 0.5)).norm() < 1e-12);
        assert!((plan.post_grasp.translation - Vector3::new(0.4, 0.0, 0.7)).norm() < 1e-12);
        assert_eq!(plan.post_grasp.rotation, plan.grasp.rotation);
        assert_eq!(plan.pre_grasp.rotation, plan.grasp.rotation);
        assert_eq!(plan.frame, Frame::World);
    }

    #[test]
    fn pre_grasp_offset_rotates_with_grasp() {
        let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), std::f64::consts::FRAC_PI_2);
        let plan = build_grasp_plan(&at(Vector3::new(0.4, 0.0, 0.6), rot), &Pose6Dof::identity(Frame::World));
        // rotation-matrix oracle: Rx(90°) maps +z to -y
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
        let approach = rx * Vector3::z();
        let expected = Vector3::new(0.4, 0.0, 0.6) - approach * 0.10;
        assert!((plan.pre_grasp.translation - expected).norm() < 1e-12);
        assert!((plan.pre_grasp.translation - Vector3::new(0.4, 0.1, 0.6)).norm() < 1e-12);
        assert!(((plan.pre_grasp.translation - plan.grasp.translation).norm() - 0.10).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn offsets_hold_for_random_poses(
            q in proptest::array::uniform4(-1.0f64..1.0),
            t in proptest::array::uniform3(-1.0f64..1.0),
            cq in proptest::array::uniform4(-1.0f64..1.0),
            ct in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            prop_assume!(q.iter().map(|x| x * x).sum::<f64>() > 1e-2);
            prop_assume!(cq.iter().map(|x| x * x).sum::<f64>() > 1e-2);
            let g = Pose6Dof::from_wxyz(q, t, Frame::Camera);
            let cam = Pose6Dof::from_wxyz(cq, ct, Frame::World);
            let plan = build_grasp_plan(&at(g.translation, g.rotation), &cam);
            prop_assert!(((plan.pre_grasp.translation - plan.grasp.translation).norm() - 0.10).abs() < 1e-9);
            prop_assert!((plan.post_grasp.translation - plan.grasp.translation - Vector3::z() * 0.10).norm() < 1e-9);
            prop_assert!((plan.grasp.rotation.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
