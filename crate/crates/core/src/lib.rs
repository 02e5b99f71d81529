pub mod ensembles;
pub mod eof;
pub mod io;
pub mod error;
pub mod optimize;
pub mod qcore;
pub mod qcorr;
pub mod states;
pub mod verify;

pub use error::{Error, Result};
pub use optimize::OptimizerConfig;
