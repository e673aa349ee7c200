//! File formats: scan CSVs, sequence files and TOML run configs.

pub mod config;
pub mod scanfile;
pub mod seqfile;

pub use config::{FitOptions, FringeOptions, Merge, Mode, RabiOptions, RunConfig, SequenceOptions};
pub use scanfile::{
    read_scan, write_scan, write_table, MAX_POPULATION, SCAN_HEADER, STDDEV_HEADER,
};
pub use seqfile::{parse_angle, parse_sequence};
