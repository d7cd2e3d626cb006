//! A small dense-tensor engine with reverse-mode differentiation and the layer
//! primitives the relation classifier is built from.
//!
//! Values are recorded on a [`Tape`]; parameters enter as leaves and their
//! gradients are read back from the [`Gradients`] returned by [`Tape::backward`].

mod gradcheck;
mod layers;
mod suite;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheckReport, REL_FLOOR};
pub use layers::{
    bilstm, conv_unit, dropout, dropout_mask, l2_penalty, l2_value, lstm_cell, lstm_pass,
    LstmParams, LstmVars,
};
pub use suite::{check_tape_fn, primitive_suite};
pub use tape::{softmax, Gradients, Tape, Var};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
