pub mod amplify;
pub mod backends;
pub mod cache;
pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod focus;
pub mod media;
pub mod parallel;
pub mod pipeline;
pub mod prompt;
pub mod scan;
pub mod trace;

pub use error::{Error, Result, Stage};
