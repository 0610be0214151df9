//! File formats, Monte Carlo evaluation and the command-line front end for
//! [`tailwatch_core`].

pub mod cli;
pub mod csv_io;
pub mod error;
pub mod harness;
pub mod model;

pub use error::{Error, Result};
