pub mod arith;
pub mod boundary;
pub mod epsexpand;
pub mod error;
pub mod hyperterm;
pub mod io;
pub mod par;
pub mod parse;
pub mod telescope;
pub mod verify;

pub use error::{Error, Result};
