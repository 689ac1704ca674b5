//! Command-line tools and the HTTP session service built on `mmtrust-core`.

pub mod cli;
pub mod service;
