//! Stage wire protocol: JSON bodies over HTTP, blocking remote clients that implement the
//! stage traits, and a server that exposes in-process stages.

pub mod client;
pub mod schema;
pub mod server;

pub use client::{register_remote, ClientError, RemoteDetector, RemoteGrasper, RemoteSegmenter, StageEndpoint, REMOTE};
pub use schema::{ErrorCode, ErrorEnvelope, ProtocolError};
pub use server::{router, serve, serve_until_signal, MockServer, ServedStages, ServerOptions};
