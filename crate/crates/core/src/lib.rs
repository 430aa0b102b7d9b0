pub mod coefficients;
pub mod diagnostics;
pub mod checkpoint;
pub mod collision;
pub mod config;
pub mod error;
pub mod fft;
pub mod kernel;
pub mod maxwellian;
pub mod oracles;
pub mod phase;
pub mod quadrature;
pub mod stepper;
pub mod transport;

pub use error::{Error, Result};
