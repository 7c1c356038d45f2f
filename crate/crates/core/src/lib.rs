//! Influence-based training-sample reweighing for group fairness of
//! logistic regression classifiers.

pub mod data;
pub mod diag;
pub mod error;
pub mod eval;
pub mod influence;
pub mod io;
pub mod lp;
pub mod model;
pub mod parallel;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
