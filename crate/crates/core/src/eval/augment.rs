//! Flip and small-rotation augmentation. Rotations turn about the image center,
//! counterclockwise on screen for positive angles; pixels that map from outside the source
//! are zero.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{BinaryMask, DepthImage, ImageRgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AugmentationOp {
    Identity,
    Hflip,
    /// Degrees.
    Rotate(i32),
    /// Rotate first, then flip.
    HflipRotate(i32),
}

impl AugmentationOp {
    pub const FAMILY: [AugmentationOp; 6] = [
        AugmentationOp::Identity,
        AugmentationOp::Rotate(-10),
        AugmentationOp::Rotate(10),
        AugmentationOp::Hflip,
        AugmentationOp::HflipRotate(-10),
        AugmentationOp::HflipRotate(10),
    ];

    fn parts(self) -> (bool, i32) {
        match self {
            AugmentationOp::Identity => (false, 0),
            AugmentationOp::Hflip => (true, 0),
            AugmentationOp::Rotate(d) => (false, d),
            AugmentationOp::HflipRotate(d) => (true, d),
        }
    }

    pub fn apply_image(self, image: &ImageRgb) -> ImageRgb {
        let (flip, deg) = self.parts();
        let rotated = rotate_image(image, f64::from(deg));
        if flip {
            hflip_image(&rotated)
        } else {
            rotated
        }
    }

    pub fn apply_mask(self, mask: &BinaryMask) -> BinaryMask {
        let (flip, deg) = self.parts();
        let rotated = rotate_mask(mask, f64::from(deg));
        if flip {
            hflip_mask(&rotated)
        } else {
            rotated
        }
    }

    /// Depth follows the mask rule (nearest neighbor).
    pub fn apply_depth(self, depth: &DepthImage) -> DepthImage {
        let (flip, deg) = self.parts();
        let (w, h) = depth.dims();
        let values = resample_nearest_with(w, h, f64::from(deg), flip, 0.0f32, |u, v| depth.get(u, v));
        DepthImage::new(w, h, values).expect("same dims, finite values")
    }
}

impl fmt::Display for AugmentationOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AugmentationOp::Identity => f.write_str("identity"),
            AugmentationOp::Hflip => f.write_str("hflip"),
            AugmentationOp::Rotate(d) => write!(f, "rotate({d:+})"),
            AugmentationOp::HflipRotate(d) => write!(f, "hflip_rotate({d:+})"),
        }
    }
}

pub fn hflip_image(image: &ImageRgb) -> ImageRgb {
    let (w, h) = image.dims();
    let mut out = image.clone();
    for v in 0..h {
        for u in 0..w {
            out.put(u, v, image.get(w - 1 - u, v));
        }
    }
    out
}

pub fn hflip_mask(mask: &BinaryMask) -> BinaryMask {
    let w = mask.width();
    BinaryMask::from_fn(w, mask.height(), |u, v| mask.get(w - 1 - u, v))
}

/// Source point, in pixel-index coordinates, that lands on output pixel `(u, v)`.
fn source_of(u: u32, v: u32, w: u32, h: u32, cos: f64, sin: f64) -> (f64, f64) {
    let (cx, cy) = (f64::from(w) / 2.0, f64::from(h) / 2.0);
    let (dx, dy) = (f64::from(u) + 0.5 - cx, f64::from(v) + 0.5 - cy);
    (cx + cos * dx - sin * dy - 0.5, cy + sin * dx + cos * dy - 0.5)
}

fn resample_nearest_with<T: Copy>(
    w: u32,
    h: u32,
    deg: f64,
    flip: bool,
    zero: T,
    get: impl Fn(u32, u32) -> T,
) -> Vec<T> {
    let (sin, cos) = deg.to_radians().sin_cos();
    let mut out = Vec::with_capacity(w as usize * h as usize);
    for v in 0..h {
        for u in 0..w {
            // flipping is applied last, so read the rotated image at the mirrored column
            let ru = if flip { w - 1 - u } else { u };
            let value = if deg == 0.0 {
                get(ru, v)
            } else {
                let (x, y) = source_of(ru, v, w, h, cos, sin);
                let (xi, yi) = (x.round(), y.round());
                if xi >= 0.0 && yi >= 0.0 && xi < f64::from(w) && yi < f64::from(h) {
                    get(xi as u32, yi as u32)
                } else {
                    zero
                }
            };
            out.push(value);
        }
    }
    out
}

/// Nearest-neighbor rotation.
pub fn rotate_mask(mask: &BinaryMask, deg: f64) -> BinaryMask {
    let (w, h) = mask.dims();
    let bits = resample_nearest_with(w, h, deg, false, false, |u, v| mask.get(u, v));
    BinaryMask::from_bools(w, h, &bits).expect("same dims")
}

/// Bilinear rotation.
pub fn rotate_image(image: &ImageRgb, deg: f64) -> ImageRgb {
    if deg == 0.0 {
        return image.clone();
    }
    let (w, h) = image.dims();
    let (sin, cos) = deg.to_radians().sin_cos();
    let mut out = ImageRgb::filled(w, h, [0, 0, 0]).expect("non-empty dims");
    let (wf, hf) = (f64::from(w), f64::from(h));
    for v in 0..h {
        for u in 0..w {
            let (x, y) = source_of(u, v, w, h, cos, sin);
            if x < -0.5 || y < -0.5 || x > wf - 0.5 || y > hf - 0.5 {
                continue;
            }
            let (x, y) = (x.clamp(0.0, wf - 1.0), y.clamp(0.0, hf - 1.0));
            let (x0, y0) = (x.floor() as u32, y.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (x - f64::from(x0), y - f64::from(y0));
            let (p00, p10, p01, p11) = (image.get(x0, y0), image.get(x1, y0), image.get(x0, y1), image.get(x1, y1));
            let mut rgb = [0u8; 3];
            for c in 0..3 {
                let top = f64::from(p00[c]) * (1.0 - fx) + f64::from(p10[c]) * fx;
                let bottom = f64::from(p01[c]) * (1.0 - fx) + f64::from(p11[c]) * fx;
                rgb[c] = (top * (1.0 - fy) + bottom * fy).round().clamp(0.0, 255.0) as u8;
            }
            out.put(u, v, rgb);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub op: AugmentationOp,
    pub image: ImageRgb,
    pub mask: BinaryMask,
    pub depth: Option<DepthImage>,
}

/// The six-member family for one loaded sample, identity first.
pub fn augment(image: &ImageRgb, mask: &BinaryMask, depth: Option<&DepthImage>) -> Vec<AugmentedSample> {
    AugmentationOp::FAMILY
        .iter()
        .map(|&op| AugmentedSample {
            op,
            image: op.apply_image(image),
            mask: op.apply_mask(mask),
            depth: depth.map(|d| op.apply_depth(d)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::compute_iou;

    fn gradient(w: u32, h: u32) -> ImageRgb {
        let mut img = ImageRgb::filled(w, h, [0, 0, 0]).unwrap();
        for v in 0..h {
            for u in 0..w {
                img.put(u, v, [(u * 7 % 256) as u8, (v * 5 % 256) as u8, ((u + v) % 256) as u8]);
            }
        }
        img
    }

    #[test]
    fn family_has_six_distinct_members() {
        let set: std::collections::HashSet<_> = AugmentationOp::FAMILY.iter().collect();
        assert_eq!(set.len(), 6);
        let img = gradient(20, 14);
        let outs: Vec<Vec<u8>> = AugmentationOp::FAMILY
            .iter()
            .map(|op| op.apply_image(&img).into_pixels())
            .collect();
        for i in 0..6 {
            for j in i + 1..6 {
                assert_ne!(outs[i], outs[j], "{} vs {}", AugmentationOp::FAMILY[i], AugmentationOp::FAMILY[j]);
            }
        }
        assert_eq!(outs[0], img.pixels());
    }

    #[test]
    fn hflip_is_an_involution() {
        let img = gradient(9, 5);
        assert_eq!(hflip_image(&hflip_image(&img)), img);
        assert_eq!(hflip_image(&img).get(0, 2), img.get(8, 2));
        let m = BinaryMask::from_fn(9, 5, |u, v| u * v % 3 == 1);
        assert_eq!(hflip_mask(&hflip_mask(&m)), m);
    }

    #[test]
    fn quarter_turn_moves_right_to_top() {
        let m = BinaryMask::from_fn(9, 9, |u, v| u == 8 && v == 4);
        let r = rotate_mask(&m, 90.0);
        assert_eq!(r.iter_set().collect::<Vec<_>>(), vec![(4, 0)]);
    }

    #[test]
    fn rotation_round_trip_keeps_masks() {
        let m = BinaryMask::from_fn(64, 48, |u, v| {
            let (du, dv) = (f64::from(u) - 30.0, f64::from(v) - 22.0);
            du * du / 200.0 + dv * dv / 60.0 < 1.0
        });
        assert!(m.count() >= 100);
        let back = rotate_mask(&rotate_mask(&m, 10.0), -10.0);
        assert!(compute_iou(&m, &back).unwrap() >= 0.95);
    }

    #[test]
    fn masks_follow_images() {
        // a lone bright pixel and a lone mask bit must land in the same place
        let (w, h) = (31, 21);
        let mut img = ImageRgb::filled(w, h, [0, 0, 0]).unwrap();
        img.put(20, 6, [255, 255, 255]);
        let m = BinaryMask::from_fn(w, h, |u, v| (u, v) == (20, 6));
        for op in AugmentationOp::FAMILY {
            let (oi, om) = (op.apply_image(&img), op.apply_mask(&m));
            let (u, v) = om.iter_set().next().expect("bit survives");
            let brightest = (0..h)
                .flat_map(|v| (0..w).map(move |u| (u, v)))
                .max_by_key(|&(u, v)| oi.get(u, v)[0])
                .unwrap();
            let d = (i64::from(u) - i64::from(brightest.0)).abs().max((i64::from(v) - i64::from(brightest.1)).abs());
            assert!(d <= 1, "{op}: mask at {:?}, image peak at {brightest:?}", (u, v));
        }
    }
}
