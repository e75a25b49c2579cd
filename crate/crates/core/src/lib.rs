pub mod builtin;
pub mod docs;
pub mod error;
pub mod linalg;
pub mod markov;
pub mod presentation;
pub mod rate;
pub mod ring;
pub mod sim;
pub mod typicality;

pub use error::{Error, Result};
