//! File formats, batch runs and the command-line interface around
//! [`echodiff_core`].

pub mod cli;
pub mod dataset;
pub mod error;
pub mod runs;
pub mod tables;
pub mod wav;
pub mod weights_io;

pub use error::{Error, ErrorKind, Result};
