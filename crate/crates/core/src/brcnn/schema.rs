use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::structreg::{PathEdge, SRCUT};
use crate::treebank::{default_relations, Direction, RelationInstance, OTHER};

/// Index into the `2K+1` directed classes: 0 is "Other", `2i+1` is relation `i`
/// read e1→e2 and `2i+2` is relation `i` read e2→e1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirectedLabel(pub usize);

impl DirectedLabel {
    pub const OTHER: DirectedLabel = DirectedLabel(0);

    /// The same relation read in the opposite direction.
    pub fn swapped(self) -> DirectedLabel {
        DirectedLabel(z_index(self.0))
    }
}

/// Direction-swapping permutation on directed class indices; fixes 0.
pub fn z_index(i: usize) -> usize {
    match i {
        0 => 0,
        i if i % 2 == 1 => i + 1,
        i => i - 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    relations: Vec<String>,
}

impl Default for LabelSchema {
    fn default() -> Self {
        LabelSchema {
            relations: default_relations(),
        }
    }
}

impl LabelSchema {
    pub fn new(relations: Vec<String>) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::Schema("at least one relation is required".into()));
        }
        let mut seen = BTreeSet::new();
        for r in &relations {
            if r == OTHER || r.is_empty() || !seen.insert(r) {
                return Err(Error::Schema(format!("invalid or repeated relation {r:?}")));
            }
        }
        Ok(LabelSchema { relations })
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn k(&self) -> usize {
        self.relations.len()
    }

    pub fn num_directed(&self) -> usize {
        2 * self.k() + 1
    }

    pub fn num_coarse(&self) -> usize {
        self.k() + 1
    }

    pub fn directed(&self, label: &str, direction: Option<Direction>) -> Result<DirectedLabel> {
        if label == OTHER {
            return Ok(DirectedLabel::OTHER);
        }
        let i = self
            .relations
            .iter()
            .position(|r| r == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        match direction {
            Some(Direction::E1ToE2) => Ok(DirectedLabel(2 * i + 1)),
            Some(Direction::E2ToE1) => Ok(DirectedLabel(2 * i + 2)),
            None => Err(Error::InvalidArgument(format!("label {label:?} needs a direction"))),
        }
    }

    pub fn of_instance(&self, inst: &RelationInstance) -> Result<DirectedLabel> {
        self.directed(&inst.label, inst.direction)
    }

    /// Undirected class: 0 for "Other", `i + 1` for relation `i`.
    pub fn coarse(&self, d: DirectedLabel) -> usize {
        d.0.div_ceil(2)
    }

    pub fn describe(&self, d: DirectedLabel) -> (String, Option<Direction>) {
        if d.0 == 0 {
            return (OTHER.to_string(), None);
        }
        let i = (d.0 - 1) / 2;
        let dir = if d.0 % 2 == 1 {
            Direction::E1ToE2
        } else {
            Direction::E2ToE1
        };
        (self.relations[i].clone(), Some(dir))
    }

    /// Short name such as `Located(e1,e2)` for reports.
    pub fn class_name(&self, d: DirectedLabel) -> String {
        match self.describe(d) {
            (label, None) => label,
            (label, Some(Direction::E1ToE2)) => format!("{label}(e1,e2)"),
            (label, Some(Direction::E2ToE1)) => format!("{label}(e2,e1)"),
        }
    }

    /// Applies the direction swap to a distribution over directed classes.
    pub fn z_map(&self, dist: &[f64]) -> Result<Vec<f64>> {
        if dist.len() != self.num_directed() {
            return Err(Error::Shape {
                op: "z_map",
                left: vec![dist.len()],
                right: vec![self.num_directed()],
            });
        }
        Ok((0..dist.len()).map(|i| dist[z_index(i)]).collect())
    }
}

pub const UNK: &str = "<UNK>";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary; `<UNK>` is always entry 0 and duplicates are dropped.
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut v = Vocab {
            items: Vec::new(),
            index: HashMap::new(),
        };
        v.push(UNK.to_string());
        for s in items {
            v.push(s.into());
        }
        v
    }

    fn push(&mut self, s: String) {
        if !self.index.contains_key(&s) {
            self.index.insert(s.clone(), self.items.len());
            self.items.push(s);
        }
    }

    /// Word vocabulary from the given forms, sorted.
    pub fn words<'a>(forms: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = forms.into_iter().collect();
        Vocab::new(set)
    }

    /// Relation vocabulary: `SRCUT` plus both traversals of each deprel, sorted.
    pub fn relations<'a>(deprels: impl IntoIterator<Item = &'a str>) -> Self {
        let set: BTreeSet<&str> = deprels.into_iter().filter(|d| *d != SRCUT).collect();
        let keys = set
            .into_iter()
            .flat_map(|d| [format!("{d}/up"), format!("{d}/down")]);
        Vocab::new(std::iter::once(SRCUT.to_string()).chain(keys))
    }

    pub fn from_items(items: Vec<String>) -> Result<Self> {
        if items.first().map(String::as_str) != Some(UNK) {
            return Err(Error::Schema(format!("vocabulary must start with {UNK}")));
        }
        let v = Vocab::new(items.iter().skip(1).cloned());
        if v.len() != items.len() {
            return Err(Error::Schema("vocabulary has duplicate entries".into()));
        }
        Ok(v)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, s: &str) -> bool {
        self.index.contains_key(s)
    }

    /// Row for `s`, or the `<UNK>` row.
    pub fn id(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(0)
    }
}

/// Relation-vocabulary key of a path edge; every flattening edge shares the `SRCUT` row.
pub fn relation_key(edge: &PathEdge) -> String {
    if edge.deprel == SRCUT {
        SRCUT.to_string()
    } else {
        format!("{}/{}", edge.deprel, edge.traversal.as_str())
    }
}
