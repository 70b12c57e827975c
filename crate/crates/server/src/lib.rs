//! HTTP service and command-line front end for the feedback engine.

pub mod api;
pub mod app;
pub mod cli;
