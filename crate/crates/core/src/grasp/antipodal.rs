use std::cmp::Ordering;

use nalgebra::Vector3;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GraspError, GraspProposal, GripperModel};
use crate::geometry::{Frame, PointCloud, Pose6Dof};

/// Seeded antipodal pair sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspSampler {
    pub gripper: GripperModel,
    pub sample_budget: usize,
    pub seed: u64,
}

/// Number of unordered pairs over `n` points.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn pairs_before_row(i: usize, n: usize) -> usize {
    i * (2 * n - i - 1) / 2
}

/// Map a rank in `0..pair_count(n)` to the pair `(i, j)`, `i < j`, in lexicographic order.
fn unrank_pair(k: usize, n: usize) -> (usize, usize) {
    let nf = n as f64;
    let disc = (2.0 * nf - 1.0).powi(2) - 8.0 * k as f64;
    let mut i = (((2.0 * nf - 1.0) - disc.max(0.0).sqrt()) / 2.0).floor().max(0.0) as usize;
    i = i.min(n - 2);
    while i > 0 && pairs_before_row(i, n) > k {
        i -= 1;
    }
    while i + 1 < n - 1 && pairs_before_row(i + 1, n) <= k {
        i += 1;
    }
    (i, i + 1 + k - pairs_before_row(i, n))
}

/// Sort key for proposals: score descending, then width ascending, then source pixels ascending.
pub fn canonical_order(a: (&GraspProposal, u32, u32), b: (&GraspProposal, u32, u32)) -> Ordering {
    b.0.score
        .total_cmp(&a.0.score)
        .then(a.0.opening_width.total_cmp(&b.0.opening_width))
        .then(a.1.cmp(&b.1))
        .then(a.2.cmp(&b.2))
}

/// Evaluate one candidate pair against the width and friction-cone tests.
pub(crate) fn evaluate_pair(
    p1: &Vector3<f64>,
    n1: &Vector3<f64>,
    p2: &Vector3<f64>,
    n2: &Vector3<f64>,
    gripper: &GripperModel,
) -> Option<GraspProposal> {
    let d = p2 - p1;
    let width = d.norm();
    if !(width > 1e-9) || width > gripper.max_opening {
        return None;
    }
    let axis = d / width;
    let quality = n1.dot(&-axis).min(n2.dot(&axis));
    if quality < gripper.min_cos() {
        return None;
    }
    let mid = (p1 + p2) * 0.5;
    let ray = mid.normalize();
    let mut approach = ray - axis * ray.dot(&axis);
    if approach.norm() < 1e-6 {
        let down = Vector3::y();
        approach = down - axis * down.dot(&axis);
    }
    let z = approach.normalize();
    let y = z.cross(&axis);
    Some(GraspProposal {
        pose: Pose6Dof::from_axes(axis, y, z, mid, Frame::Camera),
        opening_width: width,
        score: quality.clamp(0.0, 1.0),
        contact_a: *p1,
        contact_b: *p2,
    })
}

impl GraspSampler {
    pub fn new(gripper: GripperModel, sample_budget: usize, seed: u64) -> Self {
        Self {
            gripper,
            sample_budget,
            seed,
        }
    }

    /// Draw up to `sample_budget` distinct pairs; when the budget covers every pair, all
    /// pairs are enumerated. Output is in canonical order.
    pub fn sample(&self, cloud: &PointCloud) -> Result<Vec<GraspProposal>, GraspError> {
        self.gripper.validate()?;
        if cloud.is_empty() {
            return Ok(Vec::new());
        }
        let normals = cloud
            .normals
            .as_ref()
            .ok_or_else(|| GraspError::InvalidInput("cloud has no normals".into()))?;
        let n = cloud.len();
        let total = pair_count(n);
        let ranks: Vec<usize> = if self.sample_budget >= total {
            (0..total).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            index::sample(&mut rng, total, self.sample_budget).into_vec()
        };
        let mut kept: Vec<(GraspProposal, u32, u32)> = ranks
            .into_iter()
            .filter_map(|k| {
                let (i, j) = unrank_pair(k, n);
                evaluate_pair(&cloud.points[i], &normals[i], &cloud.points[j], &normals[j], &self.gripper)
                    .map(|g| (g, cloud.pixels[i], cloud.pixels[j]))
            })
            .collect();
        kept.sort_by(|a, b| canonical_order((&a.0, a.1, a.2), (&b.0, b.1, b.2)));
        Ok(kept.into_iter().map(|(g, _, _)| g).collect())
    }
}

/// Free-function form of [`GraspSampler::sample`].
pub fn sample_antipodal_grasps(
    cloud: &PointCloud,
    gripper: &GripperModel,
    sample_budget: usize,
    rng_seed: u64,
) -> Result<Vec<GraspProposal>, GraspError> {
    GraspSampler::new(*gripper, sample_budget, rng_seed).sample(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> PointCloud {
        let pixels = (0..points.len() as u32).collect();
        PointCloud {
            points,
            normals: Some(normals),
            pixels,
        }
    }

    #[test]
    fn unrank_enumerates_lexicographically() {
        for n in 2..40 {
            let mut expected = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    expected.push((i, j));
                }
            }
            let got: Vec<_> = (0..pair_count(n)).map(|k| unrank_pair(k, n)).collect();
            assert_eq!(got, expected, "n={n}");
        }
        let n = 100_000;
        assert_eq!(unrank_pair(pair_count(n) - 1, n), (n - 2, n - 1));
    }

    #[test]
    fn perfectly_antipodal_pair() {
        let c = cloud(
            vec![Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.04, 0.0, 0.5)],
            vec![Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)],
        );
        let out = sample_antipodal_grasps(&c, &GripperModel::default(), 10, 0).unwrap();
        assert_eq!(out.len(), 1);
        let g = &out[0];
        assert!((g.score - 1.0).abs() < 1e-12);
        assert!((g.opening_width - 0.04).abs() < 1e-12);
        assert!((g.pose.x_axis() - Vector3::x()).norm() < 1e-9);
        assert!((g.pose.translation - Vector3::new(0.02, 0.0, 0.5)).norm() < 1e-12);
        // approach is the view ray orthogonalized against the closing axis
        assert!(g.pose.z_axis().dot(&Vector3::z()) > 0.99);
    }

    #[test]
    fn friction_cone_violation_is_rejected() {
        let c = cloud(
            vec![Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.04, 0.0, 0.5)],
            vec![Vector3::new(-1.0, 0.0, 0.0), Vector3::new(0.0, 1.0, 0.0)],
        );
        assert!(sample_antipodal_grasps(&c, &GripperModel::default(), 10, 0).unwrap().is_empty());
    }

    #[test]
    fn too_wide_is_rejected() {
        let c = cloud(
            vec![Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.09, 0.0, 0.5)],
            vec![Vector3::new(-1.0, 0.0, 0.0), Vector3::new(1.0, 0.0, 0.0)],
        );
        assert!(sample_antipodal_grasps(&c, &GripperModel::default(), 10, 0).unwrap().is_empty());
    }

    #[test]
    fn flat_plane_yields_nothing() {
        let mut points = Vec::new();
        for i in 0..8 {
            for j in 0..8 {
                points.push(Vector3::new(0.01 * f64::from(i), 0.01 * f64::from(j), 0.5));
            }
        }
        let normals = vec![Vector3::new(0.0, 0.0, -1.0); points.len()];
        let c = cloud(points, normals);
        assert!(sample_antipodal_grasps(&c, &GripperModel::default(), usize::MAX, 3).unwrap().is_empty());
    }

    #[test]
    fn degenerate_approach_falls_back_to_camera_down() {
        // closing axis along the view ray
        let c = cloud(
            vec![Vector3::new(0.0, 0.0, 0.5), Vector3::new(0.0, 0.0, 0.54)],
            vec![Vector3::new(0.0, 0.0, -1.0), Vector3::new(0.0, 0.0, 1.0)],
        );
        let out = sample_antipodal_grasps(&c, &GripperModel::default(), 1, 0).unwrap();
        assert!((out[0].pose.z_axis() - Vector3::y()).norm() < 1e-9);
    }

    #[test]
    fn missing_normals_is_an_error() {
        let c = PointCloud {
            points: vec![Vector3::new(0.0, 0.0, 0.5)],
            normals: None,
            pixels: vec![0],
        };
        assert!(sample_antipodal_grasps(&c, &GripperModel::default(), 1, 0).is_err());
        assert!(sample_antipodal_grasps(&PointCloud::default(), &GripperModel::default(), 1, 0)
            .unwrap()
            .is_empty());
    }
}
