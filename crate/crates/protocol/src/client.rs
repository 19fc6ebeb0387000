//! Blocking clients that implement the stage traits over HTTP.

use std::time::Duration;

use partgrasp_core::geometry::{BinaryMask, CameraIntrinsics, DepthImage, ImageRgb};
use partgrasp_core::grasp::GraspProposal;
use partgrasp_core::pipeline::{DetectorStage, Detection, GraspStage, SegmenterStage, Segmentation, StageError};
use partgrasp_core::registry::StageRegistry;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::schema::{
    encode_depth, encode_image, encode_mask, DetectRequest, DetectResponse, ErrorCode, ErrorEnvelope,
    GraspRequestBody, GraspResponse, HealthResponse, IntrinsicsDoc, ProtocolError, SegmentRequest, SegmentResponse,
};

/// Name under which the remote stages are registered.
pub const REMOTE: &str = "remote";

/// Failure of one HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    /// The server answered with an error envelope, or the call timed out.
    #[error("{0}")]
    Protocol(#[from] ProtocolError),
    /// The server could not be reached or its reply was not a valid body.
    #[error("transport: {0}")]
    Transport(String),
}

impl From<ClientError> for StageError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Protocol(p) => p.into(),
            ClientError::Transport(m) => StageError::Transport(m),
        }
    }
}

/// Base URL of one stage server plus the per-request timeout.
#[derive(Debug, Clone)]
pub struct StageEndpoint {
    base: String,
    http: reqwest::blocking::Client,
}

impl StageEndpoint {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, ClientError> {
        let url = reqwest::Url::parse(base_url).map_err(|e| ClientError::Transport(format!("{base_url:?}: {e}")))?;
        if !matches!(url.scheme(), "http" | "https") {
            return Err(ClientError::Transport(format!("{base_url:?}: not an http url")));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self {
            base: base_url.trim_end_matches('/').to_string(),
            http,
        })
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, route: &str) -> String {
        format!("{}/v1/{route}", self.base)
    }

    pub fn health(&self) -> Result<HealthResponse, ClientError> {
        let response = self.http.get(self.url("health")).send().map_err(request_error)?;
        read_response(response)
    }

    /// POST `body` to `/v1/{route}` and decode the success body as `R`.
    pub fn call<B: Serialize, R: DeserializeOwned>(&self, route: &str, body: &B) -> Result<R, ClientError> {
        let bytes = serde_json::to_vec(body).map_err(|e| ClientError::Transport(e.to_string()))?;
        self.post_raw(route, bytes).and_then(read_response)
    }

    /// POST raw bytes; used to probe malformed-body handling.
    pub fn post_raw(&self, route: &str, body: Vec<u8>) -> Result<reqwest::blocking::Response, ClientError> {
        self.http
            .post(self.url(route))
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body)
            .send()
            .map_err(request_error)
    }

    pub fn detect(&self, request: &DetectRequest) -> Result<DetectResponse, ClientError> {
        self.call("detect", request)
    }

    pub fn segment(&self, request: &SegmentRequest) -> Result<SegmentResponse, ClientError> {
        self.call("segment", request)
    }

    pub fn grasp(&self, request: &GraspRequestBody) -> Result<GraspResponse, ClientError> {
        self.call("grasp", request)
    }
}

fn request_error(e: reqwest::Error) -> ClientError {
    if e.is_timeout() {
        ClientError::Protocol(ProtocolError::new(ErrorCode::Timeout, e.to_string()))
    } else {
        ClientError::Transport(e.to_string())
    }
}

/// Decode a reply: 2xx bodies as `R`, anything else as an error envelope.
pub fn read_response<R: DeserializeOwned>(response: reqwest::blocking::Response) -> Result<R, ClientError> {
    let status = response.status();
    let bytes = response.bytes().map_err(request_error)?;
    if status.is_success() {
        return serde_json::from_slice(&bytes)
            .map_err(|e| ClientError::Transport(format!("undecodable {status} body: {e}")));
    }
    match serde_json::from_slice::<ErrorEnvelope>(&bytes) {
        Ok(envelope) => Err(ClientError::Protocol(envelope.error)),
        Err(_) => Err(ClientError::Transport(format!(
            "HTTP {status} without error envelope: {}",
            String::from_utf8_lossy(&bytes[..bytes.len().min(200)])
        ))),
    }
}

pub struct RemoteDetector {
    endpoint: StageEndpoint,
}

impl RemoteDetector {
    pub fn new(endpoint: StageEndpoint) -> Self {
        Self { endpoint }
    }
}

impl DetectorStage for RemoteDetector {
    fn name(&self) -> &str {
        REMOTE
    }

    fn detect(&self, image: &ImageRgb, object_text: &str, threshold: f64) -> Result<Detection, StageError> {
        let request = DetectRequest {
            image_png_b64: encode_image(image),
            prompt: object_text.to_string(),
            threshold,
        };
        let response = self.endpoint.detect(&request)?;
        response.to_detection().map_err(|e| StageError::Transport(e.message))
    }
}

pub struct RemoteSegmenter {
    endpoint: StageEndpoint,
}

impl RemoteSegmenter {
    pub fn new(endpoint: StageEndpoint) -> Self {
        Self { endpoint }
    }
}

impl SegmenterStage for RemoteSegmenter {
    fn name(&self) -> &str {
        REMOTE
    }

    fn segment(&self, image: &ImageRgb, part_text: &str) -> Result<Segmentation, StageError> {
        let request = SegmentRequest {
            image_png_b64: encode_image(image),
            part_prompt: part_text.to_string(),
        };
        let response = self.endpoint.segment(&request)?;
        response.to_segmentation().map_err(|e| StageError::Transport(e.message))
    }
}

/// Depth travels as 16-bit millimeters, so the server sees `depth.quantized_mm()`.
pub struct RemoteGrasper {
    endpoint: StageEndpoint,
}

impl RemoteGrasper {
    pub fn new(endpoint: StageEndpoint) -> Self {
        Self { endpoint }
    }
}

impl GraspStage for RemoteGrasper {
    fn name(&self) -> &str {
        REMOTE
    }

    fn propose(
        &self,
        depth: &DepthImage,
        intrinsics: &CameraIntrinsics,
        mask: &BinaryMask,
    ) -> Result<Vec<GraspProposal>, StageError> {
        let request = GraspRequestBody {
            depth_png_b64: encode_depth(depth),
            intrinsics: IntrinsicsDoc::from_intrinsics(intrinsics),
            mask_png_b64: encode_mask(mask),
        };
        let response = self.endpoint.grasp(&request)?;
        Ok(response.grasps.iter().map(|g| g.to_proposal()).collect())
    }
}

/// Register `remote` detector, segmenter and grasp factories that read their URLs and
/// timeout from `config.endpoints`.
pub fn register_remote(registry: &mut StageRegistry) {
    fn endpoint(url: &str, timeout_ms: u64) -> Result<StageEndpoint, String> {
        StageEndpoint::new(url, Duration::from_millis(timeout_ms)).map_err(|e| e.to_string())
    }
    registry.register_detector(REMOTE, |ctx| {
        let e = &ctx.config.endpoints;
        Ok(std::sync::Arc::new(RemoteDetector::new(endpoint(&e.detect, e.timeout_ms)?)))
    });
    registry.register_segmenter(REMOTE, |ctx| {
        let e = &ctx.config.endpoints;
        Ok(std::sync::Arc::new(RemoteSegmenter::new(endpoint(&e.segment, e.timeout_ms)?)))
    });
    registry.register_grasp(REMOTE, |ctx| {
        let e = &ctx.config.endpoints;
        Ok(std::sync::Arc::new(RemoteGrasper::new(endpoint(&e.grasp, e.timeout_ms)?)))
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_http_urls() {
        assert!(StageEndpoint::new("ftp://x", Duration::from_secs(1)).is_err());
        assert!(StageEndpoint::new("not a url", Duration::from_secs(1)).is_err());
        let e = StageEndpoint::new("http://127.0.0.1:1/", Duration::from_secs(1)).unwrap();
        assert_eq!(e.url("detect"), "http://127.0.0.1:1/v1/detect");
    }

    #[test]
    fn unreachable_server_is_transport() {
        // port 1 is essentially never listening
        let e = StageEndpoint::new("http://127.0.0.1:1", Duration::from_secs(2)).unwrap();
        assert!(matches!(e.health(), Err(ClientError::Transport(_))));
    }

    #[test]
    fn remote_names_are_registered() {
        let mut r = StageRegistry::with_builtin();
        register_remote(&mut r);
        for names in r.names() {
            assert!(names.contains(&REMOTE.to_string()));
        }
    }
}
