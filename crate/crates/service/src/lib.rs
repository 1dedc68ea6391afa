//! HTTP service, CLI and flat-file persistence around `crowdgen-core`.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod http;
pub mod store;

pub use config::EngineConfig;
pub use engine::Engine;
pub use error::ServiceError;
