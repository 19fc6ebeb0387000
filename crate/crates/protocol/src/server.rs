//! HTTP server exposing in-process stages over the wire protocol. Used as the mock
//! backend in tests and by `partgrasp serve-mock`.

use std::future::Future;
use std::io;
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use partgrasp_core::pipeline::{DetectorStage, GraspStage, SegmenterStage, StageError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::sync::oneshot;

use crate::schema::{
    decode_depth, decode_image, decode_mask, DetectRequest, DetectResponse, ErrorCode, GraspRequestBody,
    GraspResponse, HealthResponse, ProtocolError, SegmentRequest, SegmentResponse, WireGrasp,
};

/// The stages a server answers for. Routes for missing stages reply `not_found`.
#[derive(Clone, Default)]
pub struct ServedStages {
    pub detector: Option<Arc<dyn DetectorStage>>,
    pub segmenter: Option<Arc<dyn SegmenterStage>>,
    pub grasper: Option<Arc<dyn GraspStage>>,
}

impl ServedStages {
    pub fn all(
        detector: Arc<dyn DetectorStage>,
        segmenter: Arc<dyn SegmenterStage>,
        grasper: Arc<dyn GraspStage>,
    ) -> Self {
        Self {
            detector: Some(detector),
            segmenter: Some(segmenter),
            grasper: Some(grasper),
        }
    }

    /// `detect`, `segment`, `grasp` for a single stage, otherwise `all`.
    pub fn label(&self) -> String {
        let served: Vec<&str> = [
            self.detector.is_some().then_some("detect"),
            self.segmenter.is_some().then_some("segment"),
            self.grasper.is_some().then_some("grasp"),
        ]
        .into_iter()
        .flatten()
        .collect();
        match served.as_slice() {
            [one] => one.to_string(),
            [] => "none".to_string(),
            _ => "all".to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ServerOptions {
    /// Stall before answering every stage call.
    pub delay: Duration,
}

struct AppState {
    stages: ServedStages,
    options: ServerOptions,
    // held across calls to single-flight stages
    serial: [Mutex<()>; 3],
}

type Shared = Arc<AppState>;

pub fn router(stages: ServedStages, options: ServerOptions) -> Router {
    let state = Arc::new(AppState {
        stages,
        options,
        serial: Default::default(),
    });
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/detect", post(detect))
        .route("/v1/segment", post(segment))
        .route("/v1/grasp", post(grasp))
        .fallback(|| async { error_response(ProtocolError::new(ErrorCode::NotFound, "no such route")) })
        .with_state(state)
}

fn error_response(e: ProtocolError) -> Response {
    let status = StatusCode::from_u16(e.code.http_status()).expect("valid status");
    json_response(status, &e.envelope())
}

fn json_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match serde_json::to_vec(body) {
        Ok(bytes) => (status, [(axum::http::header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Err(e) => error_response(ProtocolError::new(ErrorCode::Internal, e.to_string())),
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ProtocolError> {
    serde_json::from_slice(body).map_err(|e| ProtocolError::bad_request(format!("malformed body: {e}")))
}

fn missing(stage: &str) -> ProtocolError {
    ProtocolError::new(ErrorCode::NotFound, format!("{stage} stage not served here"))
}

async fn health(State(state): State<Shared>) -> Response {
    json_response(
        StatusCode::OK,
        &HealthResponse {
            status: "ok".into(),
            stage: state.stages.label(),
        },
    )
}

/// Run `work` off the async threads, after the configured delay.
async fn run_stage<R, F>(state: &Shared, slot: usize, single_flight: bool, work: F) -> Response
where
    R: Serialize + Send + 'static,
    F: FnOnce() -> Result<R, ProtocolError> + Send + 'static,
{
    if !state.options.delay.is_zero() {
        tokio::time::sleep(state.options.delay).await;
    }
    let state = state.clone();
    let joined = tokio::task::spawn_blocking(move || {
        let _guard = single_flight.then(|| state.serial[slot].lock().unwrap_or_else(|p| p.into_inner()));
        work()
    })
    .await;
    match joined {
        Ok(Ok(body)) => json_response(StatusCode::OK, &body),
        Ok(Err(e)) => error_response(e),
        Err(e) => error_response(ProtocolError::new(ErrorCode::Internal, format!("stage panicked: {e}"))),
    }
}

fn stage_err(e: StageError) -> ProtocolError {
    e.into()
}

async fn detect(State(state): State<Shared>, body: Bytes) -> Response {
    let Some(stage) = state.stages.detector.clone() else {
        return error_response(missing("detect"));
    };
    let request: DetectRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return error_response(e),
    };
    let single = stage.single_flight();
    run_stage(&state, 0, single, move || {
        let image = decode_image("image_png_b64", &request.image_png_b64)?;
        let d = stage.detect(&image, &request.prompt, request.threshold).map_err(stage_err)?;
        Ok(DetectResponse::from_detection(&d))
    })
    .await
}

async fn segment(State(state): State<Shared>, body: Bytes) -> Response {
    let Some(stage) = state.stages.segmenter.clone() else {
        return error_response(missing("segment"));
    };
    let request: SegmentRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return error_response(e),
    };
    let single = stage.single_flight();
    run_stage(&state, 1, single, move || {
        let image = decode_image("image_png_b64", &request.image_png_b64)?;
        let s = stage.segment(&image, &request.part_prompt).map_err(stage_err)?;
        Ok(SegmentResponse::from_segmentation(&s))
    })
    .await
}

async fn grasp(State(state): State<Shared>, body: Bytes) -> Response {
    let Some(stage) = state.stages.grasper.clone() else {
        return error_response(missing("grasp"));
    };
    let request: GraspRequestBody = match parse(&body) {
        Ok(r) => r,
        Err(e) => return error_response(e),
    };
    let single = stage.single_flight();
    run_stage(&state, 2, single, move || {
        let depth = decode_depth("depth_png_b64", &request.depth_png_b64)?;
        let mask = decode_mask("mask_png_b64", &request.mask_png_b64)?;
        let intrinsics = request.intrinsics.to_intrinsics()?;
        if depth.dims() != mask.dims() {
            return Err(ProtocolError::bad_request(format!(
                "depth is {:?} but mask is {:?}",
                depth.dims(),
                mask.dims()
            )));
        }
        let grasps = stage.propose(&depth, &intrinsics, &mask).map_err(stage_err)?;
        Ok(GraspResponse {
            grasps: grasps.iter().map(WireGrasp::from_proposal).collect(),
        })
    })
    .await
}

/// Serve on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    stages: ServedStages,
    options: ServerOptions,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(stages, options))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Serve on the current thread until Ctrl-C (or SIGTERM on unix).
pub fn serve_until_signal(listener: TcpListener, stages: ServedStages, options: ServerOptions) -> io::Result<()> {
    listener.set_nonblocking(true)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        serve(listener, stages, options, shutdown_signal()).await
    })
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}

/// A server running on a background thread. Dropping it shuts it down.
pub struct MockServer {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<io::Result<()>>>,
}

impl MockServer {
    /// Bind an ephemeral port on 127.0.0.1.
    pub fn spawn(stages: ServedStages, options: ServerOptions) -> io::Result<Self> {
        Self::bind("127.0.0.1:0".parse().expect("valid address"), stages, options)
    }

    pub fn bind(addr: SocketAddr, stages: ServedStages, options: ServerOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name(format!("mock-server-{}", addr.port()))
            .spawn(move || {
                runtime.block_on(async move {
                    let listener = tokio::net::TcpListener::from_std(listener)?;
                    serve(listener, stages, options, async {
                        let _ = stopped.await;
                    })
                    .await
                })
            })?;
        Ok(Self {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Stop accepting, let in-flight requests finish and join the server thread.
    pub fn shutdown(mut self) -> io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t.join().unwrap_or_else(|_| Err(io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}
