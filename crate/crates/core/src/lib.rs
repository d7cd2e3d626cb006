//! Structure-regularized shortest dependency paths and a bidirectional
//! recurrent convolutional relation classifier (SR-BRCNN).

pub mod error;
pub mod evalcli;
pub mod brcnn;
pub mod neuralcore;
pub mod structreg;
pub mod synth;
pub mod trainer;
pub mod treebank;

pub use error::{Error, Result};
