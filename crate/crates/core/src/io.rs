//! On-disk formats: 8-bit RGB PNG, 16-bit millimeter depth PNG, 8-bit gray mask PNG,
//! and the intrinsics document.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BinaryMask, CameraIntrinsics, DepthImage, GeometryError, ImageRgb};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}: {message}")]
    Decode { context: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl IoError {
    fn decode(context: impl std::fmt::Display, message: impl std::fmt::Display) -> Self {
        IoError::Decode {
            context: context.to_string(),
            message: message.to_string(),
        }
    }
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|source| IoError::File {
            path: parent.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn encode<P, C>(buffer: &ImageBuffer<P, C>) -> Vec<u8>
where
    P: image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    let mut out = Cursor::new(Vec::new());
    buffer
        .write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    out.into_inner()
}

pub fn encode_rgb_png(image: &ImageRgb) -> Vec<u8> {
    let buffer: ImageBuffer<Rgb<u8>, &[u8]> =
        ImageBuffer::from_raw(image.width(), image.height(), image.pixels()).expect("buffer size checked on construction");
    encode(&buffer)
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<ImageRgb, IoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| IoError::decode("rgb png", e))?;
    let rgb = img.to_rgb8();
    Ok(ImageRgb::new(rgb.width(), rgb.height(), rgb.into_raw())?)
}

/// 16-bit single channel, millimeters, 0 = invalid.
pub fn encode_depth_png(depth: &DepthImage) -> Vec<u8> {
    let mm: Vec<u16> = depth
        .values()
        .iter()
        .map(|d| (f64::from(*d) * 1000.0).round().clamp(0.0, f64::from(u16::MAX)) as u16)
        .collect();
    let buffer: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width(), depth.height(), mm).expect("buffer size matches");
    encode(&buffer)
}

pub fn decode_depth_png(bytes: &[u8]) -> Result<DepthImage, IoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| IoError::decode("depth png", e))?;
    let gray = match img {
        image::DynamicImage::ImageLuma16(g) => g,
        other => {
            return Err(IoError::decode(
                "depth png",
                format!("expected 16-bit single channel, got {:?}", other.color()),
            ))
        }
    };
    let (w, h) = gray.dimensions();
    let values = gray.into_raw().into_iter().map(|mm| f32::from(mm) / 1000.0).collect();
    Ok(DepthImage::new(w, h, values)?)
}

/// 8-bit gray, 0 = clear, 255 = set.
pub fn encode_mask_png(mask: &BinaryMask) -> Vec<u8> {
    let mut raw = vec![0u8; mask.width() as usize * mask.height() as usize];
    for (u, v) in mask.iter_set() {
        raw[v as usize * mask.width() as usize + u as usize] = 255;
    }
    let buffer: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_raw(mask.width(), mask.height(), raw).expect("buffer size matches");
    encode(&buffer)
}

/// Any nonzero gray value reads as set.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask, IoError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| IoError::decode("mask png", e))?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let bits: Vec<bool> = gray.as_raw().iter().map(|g| *g != 0).collect();
    Ok(BinaryMask::from_bools(w, h, &bits)?)
}

pub fn read_rgb(path: &Path) -> Result<ImageRgb, IoError> {
    decode_rgb_png(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn read_depth(path: &Path) -> Result<DepthImage, IoError> {
    decode_depth_png(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn read_mask(path: &Path) -> Result<BinaryMask, IoError> {
    decode_mask_png(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn write_rgb(path: &Path, image: &ImageRgb) -> Result<(), IoError> {
    write_file(path, &encode_rgb_png(image))
}

pub fn write_depth(path: &Path, depth: &DepthImage) -> Result<(), IoError> {
    write_file(path, &encode_depth_png(depth))
}

pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), IoError> {
    write_file(path, &encode_mask_png(mask))
}

fn with_path(err: IoError, path: &Path) -> IoError {
    match err {
        IoError::Decode { message, .. } => IoError::Decode {
            context: path.display().to_string(),
            message,
        },
        other => other,
    }
}

/// Intrinsics document: `fx, fy, cx, cy` plus the image size it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsFile {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl IntrinsicsFile {
    pub fn new(k: CameraIntrinsics, width: u32, height: u32) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width,
            height,
        }
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics, GeometryError> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy)
    }

    pub fn read(path: &Path) -> Result<Self, IoError> {
        let text = String::from_utf8(read_file(path)?).map_err(|e| IoError::decode(path.display(), e))?;
        let file: Self = toml::from_str(&text).map_err(|e| IoError::decode(path.display(), e))?;
        file.intrinsics()?;
        Ok(file)
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let text = toml::to_string(self).expect("plain struct serializes");
        write_file(path, text.as_bytes())
    }
}
