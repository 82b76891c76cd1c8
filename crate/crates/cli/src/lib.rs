//! Command line front end and HTTP JSON service for `solembed`.

pub mod api;
pub mod bench;
pub mod cli;
