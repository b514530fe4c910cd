//! Command implementations and the HTTP protocol server.

pub mod commands;
pub mod server;
