//! Command-line and HTTP front ends for `tailforge-core`.

pub mod commands;
pub mod docs;
pub mod server;

pub use docs::{Document, FitQuery, GofQuery};
