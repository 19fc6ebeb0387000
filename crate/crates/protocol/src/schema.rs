//! Request and response bodies. All bodies are UTF-8 JSON; images travel as base64 PNG
//! (RGB 8-bit, masks 8-bit gray, depth 16-bit millimeters).
//!
//! | route | request | response |
//! |---|---|---|
//! | `GET /v1/health` | | `{status, stage}` |
//! | `POST /v1/detect` | `{image_png_b64, prompt, threshold}` | `{bbox: [x_min, y_min, x_max, y_max], score}` |
//! | `POST /v1/segment` | `{image_png_b64, part_prompt}` | `{mask_png_b64, score}` |
//! | `POST /v1/grasp` | `{depth_png_b64, intrinsics: {fx, fy, cx, cy}, mask_png_b64}` | `{grasps: [{pose: {q: [w, x, y, z], t: [x, y, z]}, width, score, contacts: [[x, y, z], [x, y, z]]}]}` |
//!
//! Any non-2xx response carries `{error: {code, message}}` with `code` one of `not_found`,
//! `bad_request`, `internal`, `timeout`.

use std::fmt;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use nalgebra::Vector3;
use partgrasp_core::geometry::{BinaryMask, BoundingBox, CameraIntrinsics, DepthImage, Frame, ImageRgb, Pose6Dof};
use partgrasp_core::grasp::GraspProposal;
use partgrasp_core::io::{decode_depth_png, decode_mask_png, decode_rgb_png, encode_depth_png, encode_mask_png, encode_rgb_png};
use partgrasp_core::pipeline::{Detection, Segmentation, StageError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectRequest {
    pub image_png_b64: String,
    pub prompt: String,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectResponse {
    pub bbox: [u32; 4],
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRequest {
    pub image_png_b64: String,
    pub part_prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentResponse {
    pub mask_png_b64: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsDoc {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspRequestBody {
    pub depth_png_b64: String,
    pub intrinsics: IntrinsicsDoc,
    pub mask_png_b64: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WirePose {
    pub q: [f64; 4],
    pub t: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireGrasp {
    pub pose: WirePose,
    pub width: f64,
    pub score: f64,
    pub contacts: [[f64; 3]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraspResponse {
    pub grasps: Vec<WireGrasp>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub stage: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    NotFound,
    BadRequest,
    Internal,
    Timeout,
}

impl ErrorCode {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorCode::NotFound => 404,
            ErrorCode::BadRequest => 400,
            ErrorCode::Internal => 500,
            ErrorCode::Timeout => 504,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(deny_unknown_fields)]
pub struct ProtocolError {
    pub code: ErrorCode,
    pub message: String,
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let code = serde_json::to_value(self.code).expect("code serializes");
        write!(f, "{}: {}", code.as_str().unwrap_or("?"), self.message)
    }
}

impl ProtocolError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::BadRequest, message)
    }

    pub fn envelope(&self) -> ErrorEnvelope {
        ErrorEnvelope { error: self.clone() }
    }
}

impl From<StageError> for ProtocolError {
    fn from(e: StageError) -> Self {
        match e {
            StageError::NotFound(m) => Self::new(ErrorCode::NotFound, m),
            StageError::BadRequest(m) => Self::new(ErrorCode::BadRequest, m),
            StageError::Internal(m) | StageError::Transport(m) => Self::new(ErrorCode::Internal, m),
            StageError::Timeout(m) => Self::new(ErrorCode::Timeout, m),
        }
    }
}

impl From<ProtocolError> for StageError {
    fn from(e: ProtocolError) -> Self {
        match e.code {
            ErrorCode::NotFound => StageError::NotFound(e.message),
            ErrorCode::BadRequest => StageError::BadRequest(e.message),
            ErrorCode::Internal => StageError::Internal(e.message),
            ErrorCode::Timeout => StageError::Timeout(e.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorEnvelope {
    pub error: ProtocolError,
}

fn b64_decode(field: &str, text: &str) -> Result<Vec<u8>, ProtocolError> {
    STANDARD
        .decode(text)
        .map_err(|e| ProtocolError::bad_request(format!("{field}: invalid base64: {e}")))
}

pub fn encode_image(image: &ImageRgb) -> String {
    STANDARD.encode(encode_rgb_png(image))
}

pub fn decode_image(field: &str, text: &str) -> Result<ImageRgb, ProtocolError> {
    decode_rgb_png(&b64_decode(field, text)?).map_err(|e| ProtocolError::bad_request(format!("{field}: {e}")))
}

pub fn encode_mask(mask: &BinaryMask) -> String {
    STANDARD.encode(encode_mask_png(mask))
}

pub fn decode_mask(field: &str, text: &str) -> Result<BinaryMask, ProtocolError> {
    decode_mask_png(&b64_decode(field, text)?).map_err(|e| ProtocolError::bad_request(format!("{field}: {e}")))
}

pub fn encode_depth(depth: &DepthImage) -> String {
    STANDARD.encode(encode_depth_png(depth))
}

pub fn decode_depth(field: &str, text: &str) -> Result<DepthImage, ProtocolError> {
    decode_depth_png(&b64_decode(field, text)?).map_err(|e| ProtocolError::bad_request(format!("{field}: {e}")))
}

impl DetectResponse {
    pub fn from_detection(d: &Detection) -> Self {
        Self {
            bbox: d.bbox.as_array(),
            score: d.score,
        }
    }

    pub fn to_detection(&self) -> Result<Detection, ProtocolError> {
        let [x0, y0, x1, y1] = self.bbox;
        let bbox = BoundingBox::new(x0, y0, x1, y1).map_err(|e| ProtocolError::bad_request(format!("bbox: {e}")))?;
        Ok(Detection { bbox, score: self.score })
    }
}

impl SegmentResponse {
    pub fn from_segmentation(s: &Segmentation) -> Self {
        Self {
            mask_png_b64: encode_mask(&s.mask),
            score: s.score,
        }
    }

    pub fn to_segmentation(&self) -> Result<Segmentation, ProtocolError> {
        Ok(Segmentation {
            mask: decode_mask("mask_png_b64", &self.mask_png_b64)?,
            score: self.score,
        })
    }
}

impl IntrinsicsDoc {
    pub fn from_intrinsics(k: &CameraIntrinsics) -> Self {
        Self {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
        }
    }

    pub fn to_intrinsics(&self) -> Result<CameraIntrinsics, ProtocolError> {
        CameraIntrinsics::new(self.fx, self.fy, self.cx, self.cy)
            .map_err(|e| ProtocolError::bad_request(format!("intrinsics: {e}")))
    }
}

impl WireGrasp {
    pub fn from_proposal(g: &GraspProposal) -> Self {
        Self {
            pose: WirePose {
                q: g.pose.wxyz(),
                t: g.pose.xyz(),
            },
            width: g.opening_width,
            score: g.score,
            contacts: [g.contact_a.into(), g.contact_b.into()],
        }
    }

    /// Camera-frame proposal. The quaternion is taken as sent.
    pub fn to_proposal(&self) -> GraspProposal {
        GraspProposal {
            pose: Pose6Dof::from_wxyz_unchecked(self.pose.q, self.pose.t, Frame::Camera),
            opening_width: self.width,
            score: self.score,
            contact_a: Vector3::from(self.contacts[0]),
            contact_b: Vector3::from(self.contacts[1]),
        }
    }
}
