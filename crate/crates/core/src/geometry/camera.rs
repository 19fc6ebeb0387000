use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{BinaryMask, DepthImage, GeometryError};

/// Pinhole intrinsics in pixels. No distortion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "fx={} fy={} must be positive, cx={} cy={} finite",
                self.fx, self.fy, self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Camera-frame ray direction (z = 1) through pixel `(u, v)`.
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// Camera-frame points with optional normals and the pixel each point came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    /// Row-major source pixel index (`v * width + u`).
    pub pixels: Vec<u32>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Keep the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|i| self.points[*i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| indices.iter().map(|i| n[*i]).collect()),
            pixels: indices.iter().map(|i| self.pixels[*i]).collect(),
        }
    }
}

/// Lift valid depth pixels (optionally restricted to `mask`) into the camera frame.
pub fn backproject(
    depth: &DepthImage,
    intrinsics: &CameraIntrinsics,
    mask: Option<&BinaryMask>,
) -> Result<PointCloud, GeometryError> {
    if let Some(m) = mask {
        if m.dims() != depth.dims() {
            return Err(GeometryError::DimensionMismatch {
                expected: depth.dims(),
                actual: m.dims(),
            });
        }
    }
    let mut cloud = PointCloud::default();
    let mut push = |u: u32, v: u32| {
        let d = f64::from(depth.get(u, v));
        if d > 0.0 {
            cloud.points.push(Vector3::new(
                (f64::from(u) - intrinsics.cx) * d / intrinsics.fx,
                (f64::from(v) - intrinsics.cy) * d / intrinsics.fy,
                d,
            ));
            cloud.pixels.push(v * depth.width() + u);
        }
    };
    match mask {
        Some(m) => m.iter_set().for_each(|(u, v)| push(u, v)),
        None => {
            for v in 0..depth.height() {
                for u in 0..depth.width() {
                    push(u, v);
                }
            }
        }
    }
    Ok(cloud)
}

/// Real-valued pixel coordinates of a camera-frame point.
pub fn project(point: &Vector3<f64>, intrinsics: &CameraIntrinsics) -> Result<(f64, f64), GeometryError> {
    if !(point.z > 0.0) {
        return Err(GeometryError::BehindCamera(point.z));
    }
    Ok((
        intrinsics.fx * point.x / point.z + intrinsics.cx,
        intrinsics.fy * point.y / point.z + intrinsics.cy,
    ))
}
