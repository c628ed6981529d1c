//! Library surface of the stutl command line tool; the binary in main.rs
//! is a thin clap dispatcher over these modules.

pub mod commands;
pub mod config;
