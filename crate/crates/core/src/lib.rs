pub mod error;
pub mod gallery;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod repsys;
pub mod soscert;
pub mod words;

pub use error::{Error, Result};
