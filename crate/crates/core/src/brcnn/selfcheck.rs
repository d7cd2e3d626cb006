use std::collections::BTreeSet;

use super::model::{Mode, Model};
use super::params::ModelDims;
use super::schema::{DirectedLabel, LabelSchema, Vocab};
use crate::error::Result;
use crate::neuralcore::GradCheckReport;
use crate::structreg::{extract_sdp, flatten};
use crate::synth::reference_tree;

/// Finite-difference check of the full objective with respect to every
/// parameter, on the three-edge path `b a e g` left after cutting `e` from the
/// reference tree, with 4-dimensional channels. Dropout is active so its masks
/// are covered too.
pub fn end_to_end_check(seed: u64, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let tree = reference_tree();
    let words = Vocab::words(tree.tokens.iter().map(|t| t.form.as_str()));
    let rels = Vocab::relations(tree.tokens.iter().map(|t| t.deprel.as_str()));
    let dims = ModelDims {
        word_dim: 4,
        rel_dim: 4,
        conv_dim: 4,
    };
    let mut model = Model::new(LabelSchema::default(), words, rels, dims, 0.5, None, seed);
    // larger-than-init weights so no gradient is vanishingly small
    for t in model.params.tensors_mut() {
        for v in t.data_mut() {
            *v *= 4.0;
        }
    }
    let path = extract_sdp(&flatten(&tree, &BTreeSet::from([5]))?, 2, 7)?;
    let gold = DirectedLabel(1 + (seed as usize % 18));
    model.gradient_check(&path, gold, 1e-3, Mode::Train { keep: 0.8, seed }, step, tolerance)
}
