//! HTTP service and command-line front end for the extraction pipeline.

pub mod api;
pub mod commands;

pub use api::{router, serve, ApiOptions};
