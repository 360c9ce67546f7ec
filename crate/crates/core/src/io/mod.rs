//! Persistence, configuration and report output.

pub mod config;
pub mod fstk;
pub mod svg;
pub mod table;

pub use config::{AnalysisConfig, ConfigError, OutputFormat, RunConfig};
pub use fstk::{decode_stack, encode_stack, read_stack, write_stack, FstkError};
pub use svg::{Plot, Series, Style};
pub use table::Table;
