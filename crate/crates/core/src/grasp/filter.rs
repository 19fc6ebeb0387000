use serde::{Deserialize, Serialize};

use super::{GraspError, GraspProposal};
use crate::geometry::{project, BinaryMask, CameraIntrinsics, DepthImage, GeometryError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterTolerances {
    /// Chebyshev distance in pixels from a projected point to the nearest set mask bit.
    pub pixel_tolerance: u32,
    /// Allowed disagreement between the grasp center depth and the depth image, meters.
    pub depth_tolerance: f64,
}

impl Default for FilterTolerances {
    fn default() -> Self {
        Self {
            pixel_tolerance: 2,
            depth_tolerance: 0.02,
        }
    }
}

/// Keep proposals whose contacts and center project onto the mask and whose center
/// depth agrees with the measured depth. Order is preserved.
pub fn mask_filter_grasps(
    proposals: &[GraspProposal],
    mask: &BinaryMask,
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
    tolerances: FilterTolerances,
) -> Result<Vec<GraspProposal>, GraspError> {
    if mask.dims() != depth.dims() {
        return Err(GeometryError::DimensionMismatch {
            expected: depth.dims(),
            actual: mask.dims(),
        }
        .into());
    }
    let on_mask = |p| -> Option<(i64, i64)> {
        let (u, v) = project(&p, intrinsics).ok()?;
        let (u, v) = (u.round() as i64, v.round() as i64);
        mask.near_set(u, v, tolerances.pixel_tolerance).then_some((u, v))
    };
    Ok(proposals
        .iter()
        .filter(|g| {
            if on_mask(g.contact_a).is_none() || on_mask(g.contact_b).is_none() {
                return false;
            }
            let mid = g.midpoint();
            let Some((u, v)) = on_mask(mid) else {
                return false;
            };
            if u < 0 || v < 0 || u >= i64::from(depth.width()) || v >= i64::from(depth.height()) {
                return false;
            }
            let measured = f64::from(depth.get(u as u32, v as u32));
            measured > 0.0 && (mid.z - measured).abs() <= tolerances.depth_tolerance
        })
        .copied()
        .collect())
}

/// Highest-ranked proposal: score descending, then width ascending; remaining ties keep
/// the input order, which the sampler already breaks by source pixel.
pub fn select_top_grasp(proposals: &[GraspProposal]) -> Result<GraspProposal, GraspError> {
    proposals
        .iter()
        .enumerate()
        .min_by(|(ia, a), (ib, b)| {
            b.score
                .total_cmp(&a.score)
                .then(a.opening_width.total_cmp(&b.opening_width))
                .then(ia.cmp(ib))
        })
        .map(|(_, g)| *g)
        .ok_or(GraspError::NoGraspFound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{backproject, Frame, Pose6Dof};
    use nalgebra::Vector3;

    fn k() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 32.0, 24.0).unwrap()
    }

    fn proposal(a: Vector3<f64>, b: Vector3<f64>, score: f64) -> GraspProposal {
        GraspProposal {
            pose: Pose6Dof::from_translation((a + b) * 0.5, Frame::Camera),
            opening_width: (b - a).norm(),
            score,
            contact_a: a,
            contact_b: b,
        }
    }

    fn flat_depth(d: f32) -> DepthImage {
        DepthImage::new(64, 48, vec![d; 64 * 48]).unwrap()
    }

    #[test]
    fn contacts_from_masked_pixels_are_kept() {
        let depth = flat_depth(0.5);
        let mask = BinaryMask::from_fn(64, 48, |u, v| (30..40).contains(&u) && (20..26).contains(&v));
        let cloud = backproject(&depth, &k(), Some(&mask)).unwrap();
        let g = proposal(cloud.points[0], cloud.points[cloud.len() - 1], 0.9);
        let kept = mask_filter_grasps(&[g], &mask, &depth, &k(), FilterTolerances::default()).unwrap();
        assert_eq!(kept, vec![g]);
    }

    #[test]
    fn empty_mask_drops_everything() {
        let depth = flat_depth(0.5);
        let mask = BinaryMask::new(64, 48);
        let g = proposal(Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.01, 0.0, 0.5), 1.0);
        assert!(mask_filter_grasps(&[g; 3], &mask, &depth, &k(), FilterTolerances::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn midpoint_five_pixels_off_mask_is_dropped() {
        let depth = flat_depth(0.5);
        // two disjoint blobs; the contacts land on them, the midpoint falls in the 10 px gap
        let mask = BinaryMask::from_fn(64, 48, |u, v| (u <= 27 || u >= 37) && (20..28).contains(&v));
        let px = |u: f64| Vector3::new((u - 32.0) * 0.5 / 500.0, 0.0, 0.5);
        let g = proposal(px(27.0), px(37.0), 1.0);
        // midpoint projects to u = 32; nearest set pixels at 27 and 37 are 5 px away
        let kept = mask_filter_grasps(&[g], &mask, &depth, &k(), FilterTolerances::default()).unwrap();
        assert!(kept.is_empty());
        let loose = FilterTolerances {
            pixel_tolerance: 5,
            depth_tolerance: 0.02,
        };
        assert_eq!(mask_filter_grasps(&[g], &mask, &depth, &k(), loose).unwrap().len(), 1);
    }

    #[test]
    fn thin_mask_shifted_past_tolerance_drops_all() {
        let depth = flat_depth(0.5);
        let strip = BinaryMask::from_fn(64, 48, |u, _| (30..33).contains(&u));
        let cloud = backproject(&depth, &k(), Some(&strip.shifted(5, 0))).unwrap();
        let proposals: Vec<_> = cloud
            .points
            .chunks(2)
            .filter(|c| c.len() == 2)
            .map(|c| proposal(c[0], c[1], 0.5))
            .collect();
        assert!(!proposals.is_empty());
        let kept = mask_filter_grasps(&proposals, &strip, &depth, &k(), FilterTolerances::default()).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn depth_disagreement_is_dropped() {
        let depth = flat_depth(0.47);
        let mask = BinaryMask::from_fn(64, 48, |_, _| true);
        let g = proposal(Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.01, 0.0, 0.5), 1.0);
        assert!(mask_filter_grasps(&[g], &mask, &depth, &k(), FilterTolerances::default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let err = mask_filter_grasps(&[], &BinaryMask::new(3, 3), &flat_depth(0.5), &k(), FilterTolerances::default());
        assert!(err.is_err());
    }

    #[test]
    fn selection_rules() {
        let base = |score: f64, width: f64| proposal(Vector3::new(0.0, 0.0, 0.5), Vector3::new(width, 0.0, 0.5), score);
        let picked = select_top_grasp(&[base(0.4, 0.02), base(0.9, 0.02), base(0.7, 0.02)]).unwrap();
        assert_eq!(picked.score, 0.9);
        let picked = select_top_grasp(&[base(0.8, 0.05), base(0.8, 0.03)]).unwrap();
        assert!((picked.opening_width - 0.03).abs() < 1e-12);
        assert_eq!(select_top_grasp(&[]), Err(GraspError::NoGraspFound));
    }
}
