//! Configuration, file output and the command-line interface.

pub mod cli;
pub mod config;
pub mod csv;
pub mod svg;

pub use cli::cli_main;
pub use config::{load_config, RunConfig};
pub use csv::write_csv;
pub use svg::{emit_svg_plot, render_svg, Series};
