use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rayon::prelude::*;

use super::knn::GridIndex;
use super::GraspError;
use crate::geometry::PointCloud;

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 10;

/// Fill `cloud.normals` with PCA normals over each point's `k` nearest neighbors,
/// oriented toward the camera origin.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud, GraspError> {
    if k < 3 {
        return Err(GraspError::InvalidParameter(format!("neighbor count {k} < 3")));
    }
    if cloud.len() < k + 1 {
        return Err(GraspError::InsufficientPoints {
            needed: k + 1,
            found: cloud.len(),
        });
    }
    let index = GridIndex::build(&cloud.points, k);
    let normals = cloud
        .points
        .par_iter()
        .map(|p| {
            // the query point itself plus its k neighbors
            let neighbors = index.nearest(p, k + 1);
            let centroid = neighbors.iter().map(|i| cloud.points[*i]).sum::<Vector3<f64>>() / neighbors.len() as f64;
            let mut cov = Matrix3::zeros();
            for i in &neighbors {
                let d = cloud.points[*i] - centroid;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let smallest = eig.eigenvalues.imin();
            let mut n: Vector3<f64> = eig.eigenvectors.column(smallest).into_owned();
            n.normalize_mut();
            if n.dot(&-p) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    Ok(PointCloud {
        points: cloud.points.clone(),
        normals: Some(normals),
        pixels: cloud.pixels.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud_of(points: Vec<Vector3<f64>>) -> PointCloud {
        let pixels = (0..points.len() as u32).collect();
        PointCloud {
            points,
            normals: None,
            pixels,
        }
    }

    #[test]
    fn plane_normals_face_camera() {
        let mut points = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                points.push(Vector3::new(-0.05 + 0.005 * f64::from(i), -0.05 + 0.005 * f64::from(j), 0.5));
            }
        }
        let out = estimate_normals(&cloud_of(points), 10).unwrap();
        for n in out.normals.unwrap() {
            assert!((n - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-3, "{n:?}");
        }
    }

    #[test]
    fn sphere_normals_point_outward() {
        let center = Vector3::new(0.0, 0.0, 0.5);
        let mut points = Vec::new();
        // visible hemisphere (facing the camera at the origin)
        for i in 0..30 {
            for j in 0..60 {
                let theta = std::f64::consts::FRAC_PI_2 * (f64::from(i) + 0.5) / 30.0 * 0.9;
                let phi = std::f64::consts::TAU * f64::from(j) / 60.0;
                let dir = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), -theta.cos());
                points.push(center + 0.1 * dir);
            }
        }
        let out = estimate_normals(&cloud_of(points.clone()), 10).unwrap();
        let cos5 = 5f64.to_radians().cos();
        for (p, n) in points.iter().zip(out.normals.unwrap()) {
            let outward = (p - center).normalize();
            assert!(n.dot(&outward) >= cos5, "{n:?} vs {outward:?}");
            assert!(n.dot(&-p) >= 0.0);
        }
    }

    #[test]
    fn too_few_points() {
        let cloud = cloud_of(vec![Vector3::new(0.0, 0.0, 0.5); 3]);
        assert!(matches!(
            estimate_normals(&cloud, 10),
            Err(GraspError::InsufficientPoints { needed: 11, found: 3 })
        ));
    }
}
