pub mod cli;
pub mod cuts;
pub mod dro;
pub mod error;
pub mod kernel;
pub mod lp;
pub mod scenario;
pub mod sddp;
pub mod stage;
pub mod toy;

pub use error::{Error, Result};
