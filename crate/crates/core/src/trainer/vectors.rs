//! Pretrained word vectors in word2vec text format.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brcnn::EMBED_INIT_BOUND;
use crate::error::{Error, Result};
use crate::neuralcore::Tensor;

/// A `words.len() × dim` table: rows for words present in `text` are copied,
/// the rest are drawn uniformly from `±EMBED_INIT_BOUND`. Returns the table and
/// the number of covered words.
pub fn parse_word_vectors(text: &str, words: &[String], dim: usize, seed: u64) -> Result<(Tensor, usize)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        msg: "missing \"count dim\" header".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let file_dim = match fields.as_slice() {
        [count, d] if count.parse::<usize>().is_ok() => d.parse::<usize>().ok(),
        _ => None,
    }
    .ok_or_else(|| Error::Parse {
        line: hline + 1,
        msg: format!("expected \"count dim\" header, got {header:?}"),
    })?;
    if file_dim != dim {
        return Err(Error::InvalidArgument(format!(
            "word vectors are {file_dim}-dimensional but the model expects {dim}"
        )));
    }

    let index: HashMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..words.len() * dim)
        .map(|_| rng.gen_range(-EMBED_INIT_BOUND..=EMBED_INIT_BOUND))
        .collect();
    let mut table = Tensor::new(vec![words.len(), dim], data)?;
    let mut covered = vec![false; words.len()];

    for (i, line) in lines {
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad vector component: {e}"),
            })?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected {dim} components, found {}", values.len()),
            });
        }
        if let Some(&row) = index.get(token) {
            if !covered[row] {
                table.row_mut(row).copy_from_slice(&values);
                covered[row] = true;
            }
        }
    }
    let n = covered.iter().filter(|&&c| c).count();
    Ok((table, n))
}

pub fn load_word_vectors(path: &Path, words: &[String], dim: usize, seed: u64) -> Result<(Tensor, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
    parse_word_vectors(&text, words, dim, seed).map_err(|e| e.in_file(path))
}
