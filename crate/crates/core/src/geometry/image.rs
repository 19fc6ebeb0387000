use super::{BoundingBox, GeometryError};

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct ImageRgb {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for ImageRgb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageRgb")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl ImageRgb {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidImage("zero-sized image".into()));
        }
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(GeometryError::InvalidImage(format!(
                "pixel buffer holds {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, GeometryError> {
        let pixels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Self::new(width, height, pixels)
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

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    pub fn get(&self, u: u32, v: u32) -> [u8; 3] {
        let i = (v as usize * self.width as usize + u as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn put(&mut self, u: u32, v: u32, rgb: [u8; 3]) {
        let i = (v as usize * self.width as usize + u as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }

    /// One row of pixels as raw bytes.
    pub fn row(&self, v: u32) -> &[u8] {
        let stride = self.width as usize * 3;
        let start = v as usize * stride;
        &self.pixels[start..start + stride]
    }
}

/// Row-major depth map in meters; `0.0` is the invalid-depth sentinel.
#[derive(Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    depth: Vec<f32>,
}

impl std::fmt::Debug for DepthImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DepthImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl DepthImage {
    pub fn new(width: u32, height: u32, depth: Vec<f32>) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidImage("zero-sized depth image".into()));
        }
        if depth.len() != width as usize * height as usize {
            return Err(GeometryError::InvalidImage(format!(
                "depth buffer holds {} values, expected {}",
                depth.len(),
                width as usize * height as usize
            )));
        }
        if let Some(bad) = depth.iter().find(|d| !d.is_finite() || **d < 0.0) {
            return Err(GeometryError::InvalidImage(format!(
                "depth values must be finite and non-negative, found {bad}"
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
        })
    }

    pub fn zeros(width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(width, height, vec![0.0; width as usize * height as usize])
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

    pub fn values(&self) -> &[f32] {
        &self.depth
    }

    pub fn get(&self, u: u32, v: u32) -> f32 {
        self.depth[v as usize * self.width as usize + u as usize]
    }

    /// Round every value to whole millimeters, the resolution of the on-disk format.
    pub fn quantized_mm(&self) -> Self {
        let depth = self
            .depth
            .iter()
            .map(|d| {
                let mm = (f64::from(*d) * 1000.0).round().min(f64::from(u16::MAX));
                (mm as f32) / 1000.0
            })
            .collect();
        Self {
            width: self.width,
            height: self.height,
            depth,
        }
    }
}

/// Crop `image` to `bbox`; pixel `(u, v)` of the result is `(u + x_min, v + y_min)` of the input.
pub fn crop_image(image: &ImageRgb, bbox: &BoundingBox) -> Result<ImageRgb, GeometryError> {
    bbox.check_within(image.width, image.height)?;
    let mut pixels = Vec::with_capacity(bbox.area() as usize * 3);
    for v in bbox.y_min..bbox.y_max {
        let row = image.row(v);
        pixels.extend_from_slice(&row[bbox.x_min as usize * 3..bbox.x_max as usize * 3]);
    }
    ImageRgb::new(bbox.width(), bbox.height(), pixels)
}

pub fn crop_depth(depth: &DepthImage, bbox: &BoundingBox) -> Result<DepthImage, GeometryError> {
    bbox.check_within(depth.width, depth.height)?;
    let mut values = Vec::with_capacity(bbox.area() as usize);
    for v in bbox.y_min..bbox.y_max {
        let start = v as usize * depth.width as usize;
        values.extend_from_slice(&depth.depth[start + bbox.x_min as usize..start + bbox.x_max as usize]);
    }
    DepthImage::new(bbox.width(), bbox.height(), values)
}
