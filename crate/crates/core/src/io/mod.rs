//! File formats: configuration, grey maps and CSV tables.

pub mod config;
pub mod pgm;
pub mod table;
