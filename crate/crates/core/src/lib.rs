//! Synthetic RSRP fault-map laboratory: scenario simulation, fault
//! injection, image rendering, four from-scratch classifiers and the
//! evaluation metrics that compare them.

pub mod cnn;
pub mod error;
pub mod eval;
pub mod fault;
pub mod imaging;
pub mod nb;
pub mod nef;
pub mod netpbm;
pub mod persist;
pub mod rf;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
