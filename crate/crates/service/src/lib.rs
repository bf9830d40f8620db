//! Command line, artifact store and HTTP service around `hotspot-core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod error;
pub mod store;
pub mod workspace;

pub use config::RunConfig;
pub use error::{Result, ServiceError};
pub use store::{Store, STORE_ENV};
pub use workspace::Workspace;
