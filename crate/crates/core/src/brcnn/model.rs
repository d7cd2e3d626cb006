use std::collections::BTreeMap;

use super::params::{ModelDims, ModelGrads, ModelParams, ParamGrad, ParamVars};
use super::schema::{relation_key, DirectedLabel, LabelSchema, Vocab};
use crate::error::{Error, Result};
use crate::neuralcore::{
    bilstm, conv_unit, dropout, grad_check, l2_penalty, softmax, GradCheckReport, Tape, Tensor, Var,
};
use crate::structreg::{reverse_path, sr_sdp, CutStrategy, SdpPath};
use crate::treebank::RelationInstance;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Eval,
    /// Dropout on embeddings with keep probability `keep`; masks derive from `seed`.
    Train { keep: f64, seed: u64 },
}

/// SplitMix64 finalizer, used to derive independent sub-seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Embedded path: tape vars (after dropout) plus the table rows they came from.
/// Gradients for the tables are read off the pre-dropout leaves.
#[derive(Debug, Clone)]
pub struct EmbeddedPath {
    pub words: Vec<Var>,
    pub rels: Vec<Var>,
    pub word_leaves: Vec<Var>,
    pub rel_leaves: Vec<Var>,
    pub word_rows: Vec<usize>,
    pub rel_rows: Vec<usize>,
}

/// One recorded forward computation of both RCNNs and all three classifiers.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub tape: Tape,
    pub vars: ParamVars,
    pub fwd: EmbeddedPath,
    pub bwd: EmbeddedPath,
    pub fwd_pool: Var,
    pub bwd_pool: Var,
    pub fwd_fine: Var,
    pub bwd_fine: Var,
    pub coarse: Var,
}

#[derive(Debug, Clone, Copy)]
pub struct LossTerms {
    pub total: Var,
    pub fwd: f64,
    pub bwd: f64,
    pub coarse: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Mixed distribution over the directed classes.
    pub directed: Vec<f64>,
    pub fwd: Vec<f64>,
    pub bwd: Vec<f64>,
    pub coarse: Vec<f64>,
    pub decoded: DirectedLabel,
}

/// Mixes the forward distribution with the direction-swapped backward one and
/// returns the argmax (lowest index on ties) with the mixture.
pub fn decode(
    schema: &LabelSchema,
    fwd_logits: &[f64],
    bwd_logits: &[f64],
    alpha: f64,
) -> Result<(DirectedLabel, Vec<f64>)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    let pf = softmax(fwd_logits);
    let pb = schema.z_map(&softmax(bwd_logits))?;
    if pf.len() != pb.len() {
        return Err(Error::Shape {
            op: "decode",
            left: vec![pf.len()],
            right: vec![pb.len()],
        });
    }
    let mix: Vec<f64> = pf
        .iter()
        .zip(&pb)
        .map(|(f, b)| alpha * f + (1.0 - alpha) * b)
        .collect();
    let mut best = 0;
    for (i, &v) in mix.iter().enumerate() {
        if v > mix[best] {
            best = i;
        }
    }
    Ok((DirectedLabel(best), mix))
}

/// The complete classifier: label schema, vocabularies, dimensions, decode weight,
/// the structure-regularization strategy it was trained with, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub schema: LabelSchema,
    pub word_vocab: Vocab,
    pub rel_vocab: Vocab,
    pub dims: ModelDims,
    pub alpha: f64,
    pub strategy: Option<CutStrategy>,
    pub params: ModelParams,
}

impl Model {
    pub fn new(
        schema: LabelSchema,
        word_vocab: Vocab,
        rel_vocab: Vocab,
        dims: ModelDims,
        alpha: f64,
        strategy: Option<CutStrategy>,
        seed: u64,
    ) -> Self {
        let params = ModelParams::init(&dims, word_vocab.len(), rel_vocab.len(), schema.k(), seed);
        Model {
            schema,
            word_vocab,
            rel_vocab,
            dims,
            alpha,
            strategy,
            params,
        }
    }

    /// Same as [`Model::new`] with every parameter set to zero.
    pub fn zeroed(
        schema: LabelSchema,
        word_vocab: Vocab,
        rel_vocab: Vocab,
        dims: ModelDims,
        alpha: f64,
        strategy: Option<CutStrategy>,
    ) -> Self {
        let params = ModelParams::zeros(&dims, word_vocab.len(), rel_vocab.len(), schema.k());
        Model {
            schema,
            word_vocab,
            rel_vocab,
            dims,
            alpha,
            strategy,
            params,
        }
    }

    /// SDP (or SR-SDP under the model's strategy) between the two entity heads.
    pub fn path_for(&self, inst: &RelationInstance) -> Result<SdpPath> {
        let (h1, h2) = inst.entity_heads()?;
        sr_sdp(&inst.sentence, self.strategy.as_ref(), h1, h2)
    }

    /// Table rows for the words and the `(deprel, traversal)` edges of a path.
    pub fn path_ids(&self, path: &SdpPath) -> (Vec<usize>, Vec<usize>) {
        let words = path.words.iter().map(|w| self.word_vocab.id(&w.form)).collect();
        let rels = path
            .edges
            .iter()
            .map(|e| self.rel_vocab.id(&relation_key(e)))
            .collect();
        (words, rels)
    }

    /// Looks up embeddings (unknown entries use `<UNK>`) and applies dropout in training mode.
    pub fn embed_path(
        &self,
        tape: &mut Tape,
        path: &SdpPath,
        mode: Mode,
        salt: u64,
    ) -> Result<EmbeddedPath> {
        if path.words.len() < 2 || path.edges.len() + 1 != path.words.len() {
            return Err(Error::InvalidArgument(format!(
                "path needs at least 2 words and one edge per gap, got {} words and {} edges",
                path.words.len(),
                path.edges.len()
            )));
        }
        let (word_rows, rel_rows) = self.path_ids(path);
        let mut lookup = |table: &Tensor, rows: &[usize], channel: u64| -> Result<(Vec<Var>, Vec<Var>)> {
            let mut leaves = Vec::with_capacity(rows.len());
            let mut outs = Vec::with_capacity(rows.len());
            for (pos, &r) in rows.iter().enumerate() {
                let v = tape.leaf(Tensor::vector(table.row(r).to_vec()));
                leaves.push(v);
                outs.push(match mode {
                    Mode::Eval => v,
                    Mode::Train { keep, seed } => {
                        let s = mix_seed(mix_seed(seed, salt), channel * 1_000_003 + pos as u64);
                        dropout(tape, v, keep, s, true)?
                    }
                });
            }
            Ok((outs, leaves))
        };
        let (words, word_leaves) = lookup(&self.params.word_table, &word_rows, 1)?;
        let (rels, rel_leaves) = lookup(&self.params.rel_table, &rel_rows, 2)?;
        Ok(EmbeddedPath {
            words,
            rels,
            word_leaves,
            rel_leaves,
            word_rows,
            rel_rows,
        })
    }

    /// One RCNN: BiLSTMs over both channels, a convolution per dependency unit,
    /// max pooling, and the fine classifier `(w, b)`. Returns `(pool, logits)`.
    pub fn rcnn_forward(
        &self,
        tape: &mut Tape,
        vars: &ParamVars,
        words: &[Var],
        rels: &[Var],
        fine_w: Var,
        fine_b: Var,
    ) -> Result<(Var, Var)> {
        if rels.is_empty() || rels.len() + 1 != words.len() {
            return Err(Error::InvalidArgument(format!(
                "{} words need {} relations, got {}",
                words.len(),
                words.len().saturating_sub(1),
                rels.len()
            )));
        }
        let word_states = bilstm(tape, words, &vars.word_fwd, &vars.word_bwd)?;
        let rel_states = bilstm(tape, rels, &vars.rel_fwd, &vars.rel_bwd)?;
        let h: Vec<Var> = word_states
            .iter()
            .map(|&(f, b)| tape.concat(&[f, b]))
            .collect::<Result<_>>()?;
        let r: Vec<Var> = rel_states
            .iter()
            .map(|&(f, b)| tape.concat(&[f, b]))
            .collect::<Result<_>>()?;
        let units: Vec<Var> = (0..r.len())
            .map(|k| conv_unit(tape, h[k], r[k], h[k + 1], vars.conv_w, vars.conv_b))
            .collect::<Result<_>>()?;
        let pool = tape.max_pool(&units)?;
        let logits = tape.affine(pool, fine_w, fine_b)?;
        Ok((pool, logits))
    }

    /// Forward RCNN on `path`, backward RCNN on its reversal, coarse classifier on both pools.
    pub fn forward_path(&self, path: &SdpPath, mode: Mode) -> Result<ForwardPass> {
        let mut tape = Tape::new();
        let vars = self.params.register(&mut tape);
        let reversed = reverse_path(path);
        let fwd = self.embed_path(&mut tape, path, mode, 1)?;
        let bwd = self.embed_path(&mut tape, &reversed, mode, 2)?;
        let (fwd_pool, fwd_fine) = self.rcnn_forward(
            &mut tape,
            &vars,
            &fwd.words,
            &fwd.rels,
            vars.fine_fwd_w,
            vars.fine_fwd_b,
        )?;
        let (bwd_pool, bwd_fine) = self.rcnn_forward(
            &mut tape,
            &vars,
            &bwd.words,
            &bwd.rels,
            vars.fine_bwd_w,
            vars.fine_bwd_b,
        )?;
        let both = tape.concat(&[fwd_pool, bwd_pool])?;
        let coarse = tape.affine(both, vars.coarse_w, vars.coarse_b)?;
        Ok(ForwardPass {
            tape,
            vars,
            fwd,
            bwd,
            fwd_pool,
            bwd_pool,
            fwd_fine,
            bwd_fine,
            coarse,
        })
    }

    /// Resolves entity heads, extracts the (SR-)SDP under `strategy` and runs the network.
    pub fn brcnn_forward(
        &self,
        inst: &RelationInstance,
        strategy: Option<&CutStrategy>,
        mode: Mode,
    ) -> Result<ForwardPass> {
        let (h1, h2) = inst.entity_heads()?;
        let path = sr_sdp(&inst.sentence, strategy, h1, h2)?;
        self.forward_path(&path, mode)
    }

    /// Records the penalized three-classifier cross-entropy on the pass's tape.
    /// The backward classifier's target is the direction-swapped gold class.
    pub fn loss(&self, pass: &mut ForwardPass, gold: DirectedLabel, lambda: f64) -> Result<LossTerms> {
        if gold.0 >= self.schema.num_directed() {
            return Err(Error::UnknownLabel(format!("class index {}", gold.0)));
        }
        let tape = &mut pass.tape;
        let (_, lf) = tape.softmax_xent(pass.fwd_fine, gold.0)?;
        let (_, lb) = tape.softmax_xent(pass.bwd_fine, gold.swapped().0)?;
        let (_, lc) = tape.softmax_xent(pass.coarse, self.schema.coarse(gold))?;
        let pen = l2_penalty(tape, &pass.vars.weights(), lambda)?;
        let total = tape.sum(&[lf, lb, lc, pen])?;
        let value = |v: Var| tape.value(v).data()[0];
        let terms = LossTerms {
            total,
            fwd: value(lf),
            bwd: value(lb),
            coarse: value(lc),
            penalty: value(pen),
        };
        if !tape.value(total).data()[0].is_finite() {
            return Err(Error::NonFinite("loss".into()));
        }
        Ok(terms)
    }

    /// Loss value and full parameter gradient for one path.
    pub fn loss_and_grads(
        &self,
        path: &SdpPath,
        gold: DirectedLabel,
        lambda: f64,
        mode: Mode,
    ) -> Result<(f64, ModelGrads)> {
        let mut pass = self.forward_path(path, mode)?;
        let terms = self.loss(&mut pass, gold, lambda)?;
        let g = pass.tape.backward(terms.total)?;

        let rows = |emb: &[&EmbeddedPath], words: bool| {
            let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
            for e in emb {
                let (vars, ids) = if words {
                    (&e.word_leaves, &e.word_rows)
                } else {
                    (&e.rel_leaves, &e.rel_rows)
                };
                for (&v, &row) in vars.iter().zip(ids) {
                    if let Some(gv) = g.get(v) {
                        let slot = out.entry(row).or_insert_with(|| vec![0.0; gv.len()]);
                        for (s, x) in slot.iter_mut().zip(gv) {
                            *s += x;
                        }
                    }
                }
            }
            out
        };
        let both = [&pass.fwd, &pass.bwd];
        let mut grads = vec![ParamGrad::Rows(rows(&both, true)), ParamGrad::Rows(rows(&both, false))];
        grads.extend(pass.vars.dense().into_iter().map(|v| ParamGrad::Dense(g.tensor(v))));
        let value = pass.tape.value(terms.total).data()[0];
        Ok((value, ModelGrads { grads }))
    }

    /// Loss value only.
    pub fn loss_value(&self, path: &SdpPath, gold: DirectedLabel, lambda: f64, mode: Mode) -> Result<f64> {
        let mut pass = self.forward_path(path, mode)?;
        let terms = self.loss(&mut pass, gold, lambda)?;
        Ok(pass.tape.value(terms.total).data()[0])
    }

    pub fn predict_path(&self, path: &SdpPath) -> Result<Prediction> {
        let pass = self.forward_path(path, Mode::Eval)?;
        let t = &pass.tape;
        let (fl, bl) = (t.value(pass.fwd_fine).data(), t.value(pass.bwd_fine).data());
        let (decoded, directed) = decode(&self.schema, fl, bl, self.alpha)?;
        Ok(Prediction {
            directed,
            fwd: softmax(fl),
            bwd: softmax(bl),
            coarse: softmax(t.value(pass.coarse).data()),
            decoded,
        })
    }

    pub fn predict(&self, inst: &RelationInstance) -> Result<Prediction> {
        self.predict_path(&self.path_for(inst)?)
    }

    /// Central-difference check of the analytic gradient of the full objective
    /// with respect to every parameter coordinate.
    pub fn gradient_check(
        &self,
        path: &SdpPath,
        gold: DirectedLabel,
        lambda: f64,
        mode: Mode,
        step: f64,
        tolerance: f64,
    ) -> Result<GradCheckReport> {
        let (_, grads) = self.loss_and_grads(path, gold, lambda, mode)?;
        let analytic = grads.to_dense(&self.params);
        let base: Vec<Tensor> = self.params.tensors().into_iter().cloned().collect();
        let mut probe = self.clone();
        grad_check(&base, &analytic, step, tolerance, |ps| {
            probe.params = ModelParams::from_tensors(ps.to_vec())?;
            probe.loss_value(path, gold, lambda, mode)
        })
    }
}
