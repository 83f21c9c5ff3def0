//! Library half of the pipeline driver: configuration loading and the
//! seeded subcommand compositions. The `gport` binary is a thin argument
//! parser over these.

pub mod artifacts;
pub mod config;
pub mod pipeline;
