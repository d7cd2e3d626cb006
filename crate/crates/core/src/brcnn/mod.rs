//! The bidirectional recurrent convolutional classifier over (SR-)SDPs.
//!
//! Both RCNNs share the embedding tables, the two channel BiLSTMs and the
//! dependency-unit convolution; each direction has its own fine-grained
//! `(2K+1)`-way classifier, and a coarse `(K+1)`-way classifier reads the
//! concatenated pools. Only the fine classifiers take part in decoding.

pub mod checkpoint;
mod model;
mod params;
mod schema;
mod selfcheck;

pub use model::{
    decode, mix_seed, EmbeddedPath, ForwardPass, LossTerms, Mode, Model, Prediction,
};
pub use params::{
    expected_shapes, param_kind, ModelDims, ModelGrads, ModelParams, ParamGrad, ParamKind,
    ParamVars, EMBED_INIT_BOUND, PARAM_NAMES, WEIGHT_INIT_BOUND,
};
pub use selfcheck::end_to_end_check;
pub use schema::{relation_key, z_index, DirectedLabel, LabelSchema, Vocab, UNK};
