pub mod acquisition;
pub mod driver;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod optimize;
pub mod problems;
pub mod qmc;
pub mod seeding;

pub use error::{Error, Result};
