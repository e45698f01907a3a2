//! HTTP API and command line for the cometa analytics engine.

pub mod app;
pub mod cli;
pub mod jobs;
pub mod problem;

pub use app::{router, AppState};
