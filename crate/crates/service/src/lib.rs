//! HTTP service and command-line frontend for the `tempalign` engine.

pub mod api;
pub mod cli;
pub mod engine;
pub mod error;
pub mod jobs;
pub mod openapi;

pub use engine::Engine;
pub use error::{ServiceError, ServiceResult};
