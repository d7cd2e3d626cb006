//! The validated instance store written by `preprocess`.
//!
//! A JSON-lines file whose first line is a header `{"relations": [...]}` and
//! every following line one [`RelationInstance`] with its split assigned.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::brcnn::LabelSchema;
use crate::error::{Error, Result};
use crate::treebank::RelationInstance;

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

/// Article counts of the original corpus split.
pub const DEFAULT_SPLIT_RATIOS: [f64; 3] = [695.0, 58.0, 84.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreHeader {
    pub relations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Store {
    pub schema: LabelSchema,
    pub instances: Vec<RelationInstance>,
}

impl Store {
    pub fn split(&self, name: &str) -> Vec<RelationInstance> {
        self.instances
            .iter()
            .filter(|i| i.split.as_deref() == Some(name))
            .cloned()
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let header = StoreHeader {
            relations: self.schema.relations().to_vec(),
        };
        let mut s = serde_json::to_string(&header)?;
        s.push('\n');
        for inst in &self.instances {
            s += &serde_json::to_string(inst)?;
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let parse_err = |line: usize, e: &dyn std::fmt::Display| Error::Parse {
            line: line + 1,
            msg: e.to_string(),
        };
        let (n, first) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty store: missing header line".into(),
        })?;
        let header: StoreHeader = serde_json::from_str(first).map_err(|e| parse_err(n, &e))?;
        let schema = LabelSchema::new(header.relations).map_err(|e| parse_err(n, &e))?;
        let mut instances = Vec::new();
        for (n, l) in lines {
            let inst: RelationInstance = serde_json::from_str(l).map_err(|e| parse_err(n, &e))?;
            inst.validate(schema.relations()).map_err(|e| parse_err(n, &e))?;
            if let Some(s) = &inst.split {
                if !SPLITS.contains(&s.as_str()) {
                    return Err(parse_err(n, &format!("unknown split {s:?}")));
                }
            }
            instances.push(inst);
        }
        Ok(Store { schema, instances })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))?;
        Self::from_jsonl(&text).map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?).map_err(|e| Error::from(e).in_file(path))
    }
}

/// Splits `n` articles proportionally to `ratios`; with at least three articles
/// dev and test each get one, taken from the largest other share.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    let total: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(*r >= 0.0 && r.is_finite())) || total <= 0.0 {
        return Err(Error::InvalidArgument(format!("bad split ratios {ratios:?}")));
    }
    let dev = (n as f64 * ratios[1] / total).round() as usize;
    let test = (n as f64 * ratios[2] / total).round() as usize;
    let mut c = [n.saturating_sub(dev + test), dev.min(n), test.min(n - dev.min(n))];
    if n >= 3 {
        for k in [1, 2] {
            if c[k] == 0 && ratios[k] > 0.0 {
                let donor = (0..3).filter(|&j| j != k).max_by_key(|&j| c[j]).expect("three splits");
                c[donor] -= 1;
                c[k] = 1;
            }
        }
    }
    Ok(c)
}

/// Assigns a split to every article without one, shuffling the remaining
/// article ids with `seed`. Pre-assigned splits are kept; all instances of an
/// article always share a split.
pub fn assign_splits(instances: &mut [RelationInstance], ratios: [f64; 3], seed: u64) -> Result<()> {
    let mut fixed: BTreeMap<&str, &str> = BTreeMap::new();
    for inst in instances.iter() {
        if let Some(s) = inst.split.as_deref() {
            if !SPLITS.contains(&s) {
                return Err(Error::InvalidArgument(format!(
                    "instance {}: unknown split {s:?}",
                    inst.sent_id
                )));
            }
            if let Some(prev) = fixed.insert(&inst.article, s) {
                if prev != s {
                    return Err(Error::InvalidArgument(format!(
                        "article {:?} is assigned to both {prev} and {s}",
                        inst.article
                    )));
                }
            }
        }
    }
    let fixed: BTreeMap<String, String> = fixed
        .into_iter()
        .map(|(a, s)| (a.to_string(), s.to_string()))
        .collect();
    let mut free: Vec<String> = instances
        .iter()
        .map(|i| i.article.clone())
        .filter(|a| !fixed.contains_key(a))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    free.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let counts = split_counts(free.len(), ratios)?;
    let mut assignment = fixed;
    let mut it = free.into_iter();
    for (name, &count) in SPLITS.iter().zip(&counts) {
        for article in it.by_ref().take(count) {
            assignment.insert(article, name.to_string());
        }
    }
    for inst in instances.iter_mut() {
        inst.split = assignment.get(&inst.article).cloned();
    }
    Ok(())
}
