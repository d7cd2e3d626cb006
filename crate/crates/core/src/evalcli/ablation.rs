//! One training run per cut strategy under a shared configuration.

use std::fmt::Write as _;

use serde::Serialize;

use crate::brcnn::LabelSchema;
use crate::error::{Error, Result};
use crate::structreg::CutStrategy;
use crate::trainer::{evaluate, fit, init_model, prepare, Example, TrainConfig};
use crate::treebank::RelationInstance;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub strategy: String,
    pub test_macro_f1: f64,
    pub dev_macro_f1: f64,
    pub best_epoch: usize,
    /// Mean word count of the plain SDPs of the test instances.
    pub mean_sdp_len: f64,
    /// Mean word count of the same paths after regularization.
    pub mean_sr_sdp_len: f64,
}

fn mean_len(data: &[Example]) -> f64 {
    data.iter().map(|e| e.path.len() as f64).sum::<f64>() / data.len() as f64
}

fn usable(schema: &LabelSchema, strategy: Option<&CutStrategy>, split: &str, inst: &[RelationInstance]) -> Result<Vec<Example>> {
    let (data, skipped) = prepare(schema, strategy, inst);
    if data.is_empty() {
        let why = skipped
            .first()
            .map_or_else(|| "split is empty".to_string(), |(id, e)| format!("{id}: {e}"));
        return Err(Error::InvalidArgument(format!("no usable {split} instances ({why})")));
    }
    Ok(data)
}

pub fn ablate(
    schema: &LabelSchema,
    train: &[RelationInstance],
    dev: &[RelationInstance],
    test: &[RelationInstance],
    strategies: &[Option<CutStrategy>],
    config: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    if strategies.is_empty() {
        return Err(Error::InvalidArgument("at least one strategy is required".into()));
    }
    let plain_test = usable(schema, None, "test", test)?;
    let mut rows = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let cfg = TrainConfig {
            strategy: *strategy,
            ..config.clone()
        };
        let s = strategy.as_ref();
        let train_ex = usable(schema, s, "train", train)?;
        let dev_ex = usable(schema, s, "dev", dev)?;
        let test_ex = usable(schema, s, "test", test)?;
        let model = init_model(schema.clone(), train, &cfg);
        let out = fit(model, &train_ex, &dev_ex, &cfg, None)?;
        rows.push(AblationRow {
            strategy: strategy.map_or_else(|| "none".to_string(), |s| s.to_string()),
            test_macro_f1: evaluate(&out.best, &test_ex)?.macro_f1,
            dev_macro_f1: out.best_dev_f1,
            best_epoch: out.best_epoch,
            mean_sdp_len: mean_len(&plain_test),
            mean_sr_sdp_len: mean_len(&test_ex),
        });
    }
    Ok(rows)
}

pub fn rows_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("strategy,test_macro_f1,dev_macro_f1,best_epoch,mean_sdp_len,mean_sr_sdp_len\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.strategy, r.test_macro_f1, r.dev_macro_f1, r.best_epoch, r.mean_sdp_len, r.mean_sr_sdp_len
        );
    }
    s
}

pub fn rows_table(rows: &[AblationRow]) -> String {
    let mut s = format!(
        "{:<22} {:>9} {:>9} {:>6} {:>8} {:>10}\n",
        "strategy", "test F1", "dev F1", "epoch", "SDP len", "SR-SDP len"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<22} {:>9.4} {:>9.4} {:>6} {:>8.3} {:>10.3}",
            r.strategy, r.test_macro_f1, r.dev_macro_f1, r.best_epoch, r.mean_sdp_len, r.mean_sr_sdp_len
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brcnn::ModelDims;
    use crate::synth::preposition_dataset;

    fn cfg() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 4,
            dims: ModelDims {
                word_dim: 6,
                rel_dim: 4,
                conv_dim: 6,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn preposition_rows_have_shorter_paths_and_repeat_exactly() {
        let (schema, data) = preposition_dataset(24, 2, 3);
        let (train, rest) = data.split_at(12);
        let (dev, test) = rest.split_at(6);
        let strategies = [None, Some(CutStrategy::Preposition), None];
        let rows = ablate(&schema, train, dev, test, &strategies, &cfg()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0], rows[2]);
        assert_eq!(rows[0].mean_sr_sdp_len, rows[0].mean_sdp_len);
        assert!(rows[1].mean_sr_sdp_len < rows[0].mean_sr_sdp_len);
        assert_eq!(rows_csv(&rows).lines().count(), 4);
    }

    #[test]
    fn needs_a_strategy_and_data() {
        let (schema, data) = preposition_dataset(6, 2, 3);
        assert!(ablate(&schema, &data, &data, &data, &[], &cfg()).is_err());
        assert!(ablate(&schema, &data, &data, &[], &[None], &cfg()).is_err());
    }
}
