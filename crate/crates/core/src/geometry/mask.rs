use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Axis-aligned pixel box, half-open on the max edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl BoundingBox {
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self, GeometryError> {
        if x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidRegion(format!(
                "empty box ({x_min},{y_min},{x_max},{y_max})"
            )));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn full(width: u32, height: u32) -> Self {
        Self {
            x_min: 0,
            y_min: 0,
            x_max: width,
            y_max: height,
        }
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    pub fn contains(&self, u: u32, v: u32) -> bool {
        u >= self.x_min && u < self.x_max && v >= self.y_min && v < self.y_max
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<(), GeometryError> {
        if self.x_min >= self.x_max || self.y_min >= self.y_max || self.x_max > width || self.y_max > height {
            return Err(GeometryError::InvalidRegion(format!(
                "box ({},{},{},{}) does not fit a {width}x{height} image",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        Ok(())
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        BoundingBox::new(
            self.x_min.max(other.x_min),
            self.y_min.max(other.y_min),
            self.x_max.min(other.x_max),
            self.y_max.min(other.y_max),
        )
        .ok()
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection(other).map_or(0, |b| b.area());
        let union = self.area() + other.area() - inter;
        inter as f64 / union as f64
    }

    /// Express a box given in this box's local coordinates in the parent frame.
    pub fn offset_child(&self, child: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_min: self.x_min + child.x_min,
            y_min: self.y_min + child.y_min,
            x_max: self.x_min + child.x_max,
            y_max: self.y_min + child.y_max,
        }
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }
}

/// Row-major bit-packed occupancy mask.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("count", &self.count())
            .finish()
    }
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        let bits = width as usize * height as usize;
        Self {
            width,
            height,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut mask = Self::new(width, height);
        for v in 0..height {
            for u in 0..width {
                if f(u, v) {
                    mask.set(u, v, true);
                }
            }
        }
        mask
    }

    /// Build from a row-major slice of booleans.
    pub fn from_bools(width: u32, height: u32, bits: &[bool]) -> Result<Self, GeometryError> {
        if bits.len() != width as usize * height as usize {
            return Err(GeometryError::InvalidImage(format!(
                "mask holds {} bits, expected {}",
                bits.len(),
                width as usize * height as usize
            )));
        }
        let mut mask = Self::new(width, height);
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            mask.words[i / 64] |= 1 << (i % 64);
        }
        Ok(mask)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, u: u32, v: u32) -> bool {
        let i = v as usize * self.width as usize + u as usize;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Like [`get`](Self::get) but out-of-range coordinates read as clear.
    pub fn get_signed(&self, u: i64, v: i64) -> bool {
        u >= 0 && v >= 0 && u < i64::from(self.width) && v < i64::from(self.height) && self.get(u as u32, v as u32)
    }

    pub fn set(&mut self, u: u32, v: u32, value: bool) {
        let i = v as usize * self.width as usize + u as usize;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let width = self.width as usize;
        self.words.iter().enumerate().flat_map(move |(wi, word)| {
            let mut bits = *word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let i = wi * 64 + b;
                Some(((i % width) as u32, (i / width) as u32))
            })
        })
    }

    pub fn intersection_count(&self, other: &BinaryMask) -> Result<u64, GeometryError> {
        self.check_same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum())
    }

    pub fn union_count(&self, other: &BinaryMask) -> Result<u64, GeometryError> {
        self.check_same_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a | b).count_ones()))
            .sum())
    }

    pub fn check_same_dims(&self, other: &BinaryMask) -> Result<(), GeometryError> {
        if self.dims() != other.dims() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// Tight box around the set pixels, `None` when the mask is empty.
    pub fn bounding_box(&self) -> Option<BoundingBox> {
        let mut bounds: Option<(u32, u32, u32, u32)> = None;
        for (u, v) in self.iter_set() {
            bounds = Some(match bounds {
                None => (u, v, u, v),
                Some((x0, y0, x1, y1)) => (x0.min(u), y0.min(v), x1.max(u), y1.max(v)),
            });
        }
        bounds.map(|(x0, y0, x1, y1)| BoundingBox {
            x_min: x0,
            y_min: y0,
            x_max: x1 + 1,
            y_max: y1 + 1,
        })
    }

    /// Translate by `(dx, dy)` pixels; bits leaving the frame are dropped.
    pub fn shifted(&self, dx: i32, dy: i32) -> BinaryMask {
        let mut out = BinaryMask::new(self.width, self.height);
        for (u, v) in self.iter_set() {
            let nu = i64::from(u) + i64::from(dx);
            let nv = i64::from(v) + i64::from(dy);
            if nu >= 0 && nv >= 0 && nu < i64::from(self.width) && nv < i64::from(self.height) {
                out.set(nu as u32, nv as u32, true);
            }
        }
        out
    }

    /// Morphological dilation with a square (Chebyshev) structuring element of radius `r`.
    pub fn dilated(&self, r: u32) -> BinaryMask {
        let r = i64::from(r);
        let mut out = BinaryMask::new(self.width, self.height);
        for (u, v) in self.iter_set() {
            for dv in -r..=r {
                for du in -r..=r {
                    let nu = i64::from(u) + du;
                    let nv = i64::from(v) + dv;
                    if nu >= 0 && nv >= 0 && nu < i64::from(self.width) && nv < i64::from(self.height) {
                        out.set(nu as u32, nv as u32, true);
                    }
                }
            }
        }
        out
    }

    /// Morphological erosion with a square structuring element of radius `r`; outside reads as clear.
    pub fn eroded(&self, r: u32) -> BinaryMask {
        let r = i64::from(r);
        let mut out = BinaryMask::new(self.width, self.height);
        for (u, v) in self.iter_set() {
            let keep = (-r..=r).all(|dv| (-r..=r).all(|du| self.get_signed(i64::from(u) + du, i64::from(v) + dv)));
            if keep {
                out.set(u, v, true);
            }
        }
        out
    }

    /// True when a set pixel lies within Chebyshev distance `tol` of `(u, v)`.
    pub fn near_set(&self, u: i64, v: i64, tol: u32) -> bool {
        let t = i64::from(tol);
        (-t..=t).any(|dv| (-t..=t).any(|du| self.get_signed(u + du, v + dv)))
    }
}

/// Crop a mask to `bbox`, mirroring [`crop_image`](super::crop_image).
pub fn crop_mask(mask: &BinaryMask, bbox: &BoundingBox) -> Result<BinaryMask, GeometryError> {
    bbox.check_within(mask.width, mask.height)?;
    Ok(BinaryMask::from_fn(bbox.width(), bbox.height(), |u, v| {
        mask.get(u + bbox.x_min, v + bbox.y_min)
    }))
}

/// Nearest-neighbor resample; masks are categorical so no interpolation is ever applied.
pub fn resample_nearest(mask: &BinaryMask, width: u32, height: u32) -> BinaryMask {
    if mask.dims() == (width, height) {
        return mask.clone();
    }
    let sx = f64::from(mask.width) / f64::from(width);
    let sy = f64::from(mask.height) / f64::from(height);
    BinaryMask::from_fn(width, height, |u, v| {
        let su = ((f64::from(u) + 0.5) * sx).floor().min(f64::from(mask.width - 1)) as u32;
        let sv = ((f64::from(v) + 0.5) * sy).floor().min(f64::from(mask.height - 1)) as u32;
        mask.get(su, sv)
    })
}

/// Place a crop-space mask back into a full-size frame at `bbox`.
///
/// If the segmenter returned a mask at a different resolution than the crop it was
/// given, the mask is first nearest-neighbor resampled to the box size.
pub fn embed_mask_full(
    crop_mask: &BinaryMask,
    bbox: &BoundingBox,
    full_dims: (u32, u32),
) -> Result<BinaryMask, GeometryError> {
    bbox.check_within(full_dims.0, full_dims.1)?;
    let local = resample_nearest(crop_mask, bbox.width(), bbox.height());
    let mut full = BinaryMask::new(full_dims.0, full_dims.1);
    for (u, v) in local.iter_set() {
        full.set(u + bbox.x_min, v + bbox.y_min, true);
    }
    Ok(full)
}
