//! Command-line front end for efmix: data and model I/O plus the `efmix`
//! subcommands.

pub mod app;
pub mod csv;
pub mod error;
pub mod model;
pub mod ppm;
pub mod trace;

pub use app::run;
pub use error::CliError;
