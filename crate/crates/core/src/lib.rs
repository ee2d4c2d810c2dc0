pub mod dtwsim;
pub mod error;
pub mod evalmetrics;
pub mod graphcore;
pub mod harness;
pub mod morl;
pub mod nodeembed;
pub mod numdiff;
pub mod predictor;

pub use error::{Result, StemoError};
