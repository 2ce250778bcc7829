//! Library surface of the `ipwmed` command-line tool; see the binary for
//! the user-facing entry point.

pub mod commands;
pub mod config;
