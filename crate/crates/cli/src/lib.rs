//! Library side of the batch CLI: configuration schema, deterministic
//! output writers, and the analysis pipeline the subcommands drive.

pub mod config;
pub mod dates;
pub mod output;
pub mod pipeline;
