//! Command line and HTTP front end over `jobdup-core`.

pub mod app;
pub mod cli;
pub mod config;
pub mod error;
pub mod http;

pub use app::App;
pub use config::ServiceConfig;
pub use error::{Result, ServiceError};
