//! Batch pipeline around `linked-core`: dataset and stage IO, the chat and
//! scorer gateways, knowledge pool construction, reasoning strategies,
//! reports, and the `linked` command line.

pub mod bench;
pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod gateway;
pub mod io;
pub mod log;
mod par;
pub mod pipeline;
pub mod pool;
pub mod reasoner;
pub mod report;
pub mod scorer;

pub use error::{DataError, Error, GatewayError, Result};
