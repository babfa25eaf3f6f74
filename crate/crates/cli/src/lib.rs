//! Command implementations behind the `freespace` binary.

pub mod commands;
pub mod error;
