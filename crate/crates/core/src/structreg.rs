//! Shortest dependency paths and tree-based structure regularization.
//!
//! Regularization picks a set of cut nodes, detaches each cut node's subtree and
//! hangs it directly under the sentence root with the synthetic label [`SRCUT`].
//! The SR-SDP is the shortest path in that flattened tree.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treebank::DependencyTree;

/// Deprel given to edges created by flattening.
pub const SRCUT: &str = "SRCUT";

pub const DEFAULT_CUT_RATIO: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Traversal {
    /// dependent to head
    Up,
    /// head to dependent
    Down,
}

impl Traversal {
    pub fn flip(self) -> Self {
        match self {
            Traversal::Up => Traversal::Down,
            Traversal::Down => Traversal::Up,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Traversal::Up => "up",
            Traversal::Down => "down",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathWord {
    pub index: usize,
    pub form: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathEdge {
    pub deprel: String,
    pub traversal: Traversal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SdpPath {
    pub words: Vec<PathWord>,
    /// `edges[k]` links `words[k]` and `words[k + 1]`.
    pub edges: Vec<PathEdge>,
}

impl SdpPath {
    pub fn indices(&self) -> Vec<usize> {
        self.words.iter().map(|w| w.index).collect()
    }

    pub fn forms(&self) -> Vec<&str> {
        self.words.iter().map(|w| w.form.as_str()).collect()
    }

    pub fn traversals(&self) -> Vec<Traversal> {
        self.edges.iter().map(|e| e.traversal).collect()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutStrategy {
    Punctuation,
    Random { cut_ratio: f64, seed: u64 },
    Preposition,
}

impl CutStrategy {
    pub fn random(cut_ratio: f64, seed: u64) -> Result<Self> {
        if !(cut_ratio > 0.0 && cut_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "cut ratio must lie in (0, 1), got {cut_ratio}"
            )));
        }
        Ok(CutStrategy::Random { cut_ratio, seed })
    }

    pub fn name(&self) -> &'static str {
        match self {
            CutStrategy::Punctuation => "punctuation",
            CutStrategy::Random { .. } => "random",
            CutStrategy::Preposition => "preposition",
        }
    }

    /// Parses a strategy name; `none` yields `Ok(None)`.
    pub fn parse(name: &str, cut_ratio: f64, seed: u64) -> Result<Option<Self>> {
        match name {
            "none" => Ok(None),
            "punctuation" => Ok(Some(CutStrategy::Punctuation)),
            "preposition" => Ok(Some(CutStrategy::Preposition)),
            "random" => CutStrategy::random(cut_ratio, seed).map(Some),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy {other:?} (expected none, punctuation, random or preposition)"
            ))),
        }
    }
}

/// Stable textual form: `punctuation`, `preposition` or `random:<ratio>:<seed>`.
impl fmt::Display for CutStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CutStrategy::Random { cut_ratio, seed } => write!(f, "random:{cut_ratio}:{seed}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for CutStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let strategy = match name {
            "random" => {
                let bad = || Error::InvalidArgument(format!("malformed random strategy {s:?}"));
                let ratio: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                let seed: u64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
                CutStrategy::random(ratio, seed)?
            }
            _ => CutStrategy::parse(name, DEFAULT_CUT_RATIO, 0)?.ok_or_else(|| {
                Error::InvalidArgument("\"none\" is not a cut strategy".to_string())
            })?,
        };
        if parts.next().is_some() {
            return Err(Error::InvalidArgument(format!("malformed strategy {s:?}")));
        }
        Ok(strategy)
    }
}

fn check_index(t: &DependencyTree, i: usize) -> Result<()> {
    t.token(i).map(|_| ())
}

fn depth_of(t: &DependencyTree, mut i: usize) -> Result<usize> {
    let mut d = 0;
    while t.head(i)? != 0 {
        i = t.head(i)?;
        d += 1;
        if d > t.len() {
            return Err(Error::InvalidTree(format!("cycle through token {i}")));
        }
    }
    Ok(d)
}

/// Deepest common ancestor of `i` and `j`; a node is its own ancestor.
pub fn lca(t: &DependencyTree, i: usize, j: usize) -> Result<usize> {
    check_index(t, i)?;
    check_index(t, j)?;
    let (mut a, mut b) = (i, j);
    let (mut da, mut db) = (depth_of(t, a)?, depth_of(t, b)?);
    while da > db {
        a = t.head(a)?;
        da -= 1;
    }
    while db > da {
        b = t.head(b)?;
        db -= 1;
    }
    while a != b {
        a = t.head(a)?;
        b = t.head(b)?;
    }
    Ok(a)
}

/// The unique tree path from `e1` up to the common ancestor and down to `e2`.
pub fn extract_sdp(t: &DependencyTree, e1: usize, e2: usize) -> Result<SdpPath> {
    if e1 == e2 {
        return Err(Error::DegeneratePair(e1));
    }
    let top = lca(t, e1, e2)?;
    let word = |i: usize| -> Result<PathWord> {
        Ok(PathWord {
            index: i,
            form: t.token(i)?.form.clone(),
        })
    };

    let mut words = vec![word(e1)?];
    let mut edges = Vec::new();
    let mut cur = e1;
    while cur != top {
        let tok = t.token(cur)?;
        edges.push(PathEdge {
            deprel: tok.deprel.clone(),
            traversal: Traversal::Up,
        });
        cur = tok.head;
        words.push(word(cur)?);
    }

    let mut down = Vec::new();
    let mut cur = e2;
    while cur != top {
        down.push(cur);
        cur = t.head(cur)?;
    }
    for &i in down.iter().rev() {
        edges.push(PathEdge {
            deprel: t.token(i)?.deprel.clone(),
            traversal: Traversal::Down,
        });
        words.push(word(i)?);
    }
    Ok(SdpPath { words, edges })
}

/// Picks the nodes whose subtrees get detached. The root and `protected` tokens
/// (the entity heads) are never selected.
pub fn select_cut_nodes(
    t: &DependencyTree,
    strategy: &CutStrategy,
    protected: &[usize],
) -> BTreeSet<usize> {
    let eligible = |i: usize| t.tokens[i - 1].head != 0 && !protected.contains(&i);
    match strategy {
        CutStrategy::Punctuation => {
            // segment id = number of PUNCT tokens strictly before the token
            let mut segment = vec![0usize; t.len() + 1];
            let mut seen = 0;
            for tok in &t.tokens {
                segment[tok.index] = seen;
                if tok.upos == "PUNCT" {
                    seen += 1;
                }
            }
            t.tokens
                .iter()
                .filter(|tok| tok.head != 0 && tok.head <= t.len())
                .filter(|tok| segment[tok.index] != segment[tok.head])
                .map(|tok| tok.index)
                .filter(|&i| eligible(i))
                .collect()
        }
        CutStrategy::Random { cut_ratio, seed } => {
            let non_root = t.tokens.iter().filter(|tok| tok.head != 0).count();
            let want = (cut_ratio * non_root as f64).floor() as usize;
            let candidates: Vec<usize> = (1..=t.len()).filter(|&i| eligible(i)).collect();
            let count = want.min(candidates.len());
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            rand::seq::index::sample(&mut rng, candidates.len(), count)
                .into_iter()
                .map(|k| candidates[k])
                .collect()
        }
        CutStrategy::Preposition => t
            .tokens
            .iter()
            .filter(|tok| tok.upos == "ADP" && eligible(tok.index))
            .filter(|tok| t.subtree_size(tok.index) >= 2)
            .map(|tok| tok.index)
            .collect(),
    }
}

/// Reattaches every cut node to the original root with deprel [`SRCUT`].
pub fn flatten(t: &DependencyTree, cuts: &BTreeSet<usize>) -> Result<DependencyTree> {
    let root = t
        .root()
        .ok_or_else(|| Error::InvalidTree("no root".to_string()))?;
    let mut out = t.clone();
    for &c in cuts {
        check_index(t, c)?;
        if c == root {
            return Err(Error::CutRoot(c));
        }
        let tok = &mut out.tokens[c - 1];
        tok.head = root;
        tok.deprel = SRCUT.to_string();
    }
    Ok(out)
}

/// Shortest path between `e1` and `e2` after regularizing with `strategy`
/// (`None` gives the plain SDP).
pub fn sr_sdp(
    t: &DependencyTree,
    strategy: Option<&CutStrategy>,
    e1: usize,
    e2: usize,
) -> Result<SdpPath> {
    match strategy {
        None => extract_sdp(t, e1, e2),
        Some(s) => {
            check_index(t, e1)?;
            check_index(t, e2)?;
            let cuts = select_cut_nodes(t, s, &[e1, e2]);
            extract_sdp(&flatten(t, &cuts)?, e1, e2)
        }
    }
}

pub fn reverse_path(p: &SdpPath) -> SdpPath {
    SdpPath {
        words: p.words.iter().rev().cloned().collect(),
        edges: p
            .edges
            .iter()
            .rev()
            .map(|e| PathEdge {
                deprel: e.deprel.clone(),
                traversal: e.traversal.flip(),
            })
            .collect(),
    }
}

/// One line of the `sdp` subcommand output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpRecord {
    pub sent_id: String,
    pub strategy: String,
    pub words: Vec<String>,
    pub deprels: Vec<String>,
    pub traversals: Vec<Traversal>,
}

impl SdpRecord {
    pub fn new(sent_id: &str, strategy: Option<&CutStrategy>, path: &SdpPath) -> Self {
        SdpRecord {
            sent_id: sent_id.to_string(),
            strategy: strategy.map_or("none", |s| s.name()).to_string(),
            words: path.words.iter().map(|w| w.form.clone()).collect(),
            deprels: path.edges.iter().map(|e| e.deprel.clone()).collect(),
            traversals: path.traversals(),
        }
    }
}
