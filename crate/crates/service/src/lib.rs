//! Operational shell around `qir-core`: the `qir` command line (index,
//! replay, serve) and the HTTP session API.

pub mod api;
pub mod cli;
pub mod config;
pub mod replay;
pub mod store;

pub use api::{router, AppState};
pub use config::SessionOverrides;
