//! Precision, recall and F1 over directed relation classes.
//!
//! Per-relation scores are direction-aware: a prediction counts as a true
//! positive for relation `r` only if it names `r` *and* the gold direction.
//! Macro-F1 averages the `K` relation scores, leaving "Other" out; micro-F1
//! pools the relation counts.

use serde::Serialize;

use crate::brcnn::{DirectedLabel, LabelSchema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassScores {
    pub name: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassScores {
    fn from_counts(name: String, tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, recall, f1) = prf(tp, fp, fn_);
        ClassScores {
            name,
            tp,
            fp,
            fn_,
            support: tp + fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// `(P, R, F1)` with every zero denominator read as a zero score.
pub fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// One entry per directed class, index-aligned with [`DirectedLabel`].
    pub directed: Vec<ClassScores>,
    /// One entry per relation, directions pooled but required to match.
    pub relations: Vec<ClassScores>,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    /// `confusion[gold][pred]` over directed classes.
    pub confusion: Vec<Vec<usize>>,
    pub total: usize,
}

pub fn prf1(pred: &[DirectedLabel], gold: &[DirectedLabel], schema: &LabelSchema) -> Result<MetricsReport> {
    if pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::InvalidArgument("no instances to score".into()));
    }
    let c = schema.num_directed();
    let mut confusion = vec![vec![0usize; c]; c];
    for (p, g) in pred.iter().zip(gold) {
        if p.0 >= c || g.0 >= c {
            return Err(Error::UnknownLabel(format!("class index {}", p.0.max(g.0))));
        }
        confusion[g.0][p.0] += 1;
    }
    let row = |i: usize| confusion[i].iter().sum::<usize>();
    let col = |j: usize| confusion.iter().map(|r| r[j]).sum::<usize>();

    let directed: Vec<ClassScores> = (0..c)
        .map(|i| {
            let tp = confusion[i][i];
            ClassScores::from_counts(schema.class_name(DirectedLabel(i)), tp, col(i) - tp, row(i) - tp)
        })
        .collect();

    let relations: Vec<ClassScores> = schema
        .relations()
        .iter()
        .enumerate()
        .map(|(r, name)| {
            let members = [2 * r + 1, 2 * r + 2];
            let tp: usize = members.iter().map(|&i| confusion[i][i]).sum();
            let predicted: usize = members.iter().map(|&i| col(i)).sum();
            let actual: usize = members.iter().map(|&i| row(i)).sum();
            ClassScores::from_counts(name.clone(), tp, predicted - tp, actual - tp)
        })
        .collect();

    let macro_f1 = relations.iter().map(|s| s.f1).sum::<f64>() / relations.len() as f64;
    let (tp, fp, fn_) = relations
        .iter()
        .fold((0, 0, 0), |(a, b, c), s| (a + s.tp, b + s.fp, c + s.fn_));
    let (micro_precision, micro_recall, micro_f1) = prf(tp, fp, fn_);
    let correct: usize = (0..c).map(|i| confusion[i][i]).sum();
    Ok(MetricsReport {
        directed,
        relations,
        macro_f1,
        micro_precision,
        micro_recall,
        micro_f1,
        accuracy: correct as f64 / gold.len() as f64,
        confusion,
        total: gold.len(),
    })
}

impl MetricsReport {
    /// Human-readable summary table.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{:<24} {:>9} {:>9} {:>9} {:>8}\n",
            "relation", "precision", "recall", "f1", "support"
        );
        for r in &self.relations {
            s += &format!(
                "{:<24} {:>9.4} {:>9.4} {:>9.4} {:>8}\n",
                r.name, r.precision, r.recall, r.f1, r.support
            );
        }
        s += &format!("macro-F1 {:.4}  micro-F1 {:.4}  accuracy {:.4}  n={}\n", self.macro_f1, self.micro_f1, self.accuracy, self.total);
        s
    }

    /// Per-class CSV: `level,class,tp,fp,fn,support,precision,recall,f1`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,class,tp,fp,fn,support,precision,recall,f1\n");
        let rows = self
            .relations
            .iter()
            .map(|r| ("relation", r))
            .chain(self.directed.iter().map(|r| ("directed", r)));
        for (level, r) in rows {
            s += &format!(
                "{level},{},{},{},{},{},{},{},{}\n",
                r.name, r.tp, r.fp, r.fn_, r.support, r.precision, r.recall, r.f1
            );
        }
        s += &format!("summary,macro_f1,,,,,,,{}\n", self.macro_f1);
        s += &format!("summary,micro_f1,,,,,{},{},{}\n", self.micro_precision, self.micro_recall, self.micro_f1);
        s
    }
}
