//! Library surface of the `gridflc` command-line tool: configuration schema,
//! command implementations, and the printable schema text. The binary in
//! `main.rs` is a thin argument-parsing wrapper over these.

pub mod commands;
pub mod config;
pub mod schema;
