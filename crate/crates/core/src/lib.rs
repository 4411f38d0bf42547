pub mod config;
pub mod continuous;
pub mod convergence;
pub mod counting_stats;
pub mod discrete;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod runner;
pub mod seeding;
pub mod simpson;

pub use error::{Error, Result};
