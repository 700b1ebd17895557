pub mod basis;
#[cfg(feature = "cli")]
pub mod cli;
pub mod cx;
pub mod error;
pub mod forms;
pub mod interp;
pub mod modular;
pub mod oracle;
pub mod qseries;
pub mod quad;
pub mod real;
pub mod verify;

pub use error::{Error, Result};
