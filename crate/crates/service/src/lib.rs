//! Command-line tools and the HTTP JSON service for interactive translation.

pub mod api;
pub mod cli;
pub mod server;
