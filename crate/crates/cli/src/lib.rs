//! Batch front end for the `zrp` library: TOML config in, CSV plus a plot
//! script and a warnings sidecar out.

pub mod config;
pub mod output;
pub mod run;

pub use config::{parse_config, ConfigError, Mode, RunConfig};
pub use run::{run, Outcome, RunError};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const CONFIG: u8 = 1;
    pub const RUNTIME: u8 = 2;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/config.md")]
    mod config {}
}
