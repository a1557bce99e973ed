//! File formats, configuration, plotting and the benchmark harness around
//! [`nncpd_core`].

pub mod bench;
pub mod config;
pub mod error;
pub mod io;
pub mod plot;

pub use error::{Error, Result};
pub use nncpd_core as core;
