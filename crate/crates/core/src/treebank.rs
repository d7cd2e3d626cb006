//! Dependency-parsed sentences and the relation instances that sit on top of them.
//!
//! Trees are read from CoNLL-U; relation instances come from a JSON-lines
//! sidecar keyed by `sent_id`.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The nine relation tags of the Chinese literature corpus, in corpus order.
pub const RELATION_TAGS: [&str; 9] = [
    "Located",
    "Part-Whole",
    "Family",
    "General-Special",
    "Social",
    "Ownership",
    "Use",
    "Create",
    "Near",
];

/// Label used for entity pairs that hold none of the relations.
pub const OTHER: &str = "Other";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    /// 1-based position in the sentence.
    pub index: usize,
    pub form: String,
    pub upos: String,
    /// 0 for the root, otherwise the 1-based index of the head token.
    pub head: usize,
    pub deprel: String,
}

impl Token {
    pub fn new(index: usize, form: &str, upos: &str, head: usize, deprel: &str) -> Self {
        Token {
            index,
            form: form.to_string(),
            upos: upos.to_string(),
            head,
            deprel: deprel.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DependencyTree {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub tokens: Vec<Token>,
}

impl DependencyTree {
    pub fn new(tokens: Vec<Token>) -> Self {
        DependencyTree {
            sent_id: None,
            doc_id: None,
            tokens,
        }
    }

    /// Builds a tree from `(form, upos, head, deprel)` rows, numbering tokens from 1.
    pub fn from_rows(rows: &[(&str, &str, usize, &str)]) -> Self {
        let tokens = rows
            .iter()
            .enumerate()
            .map(|(i, &(form, upos, head, deprel))| Token::new(i + 1, form, upos, head, deprel))
            .collect();
        DependencyTree::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Token at 1-based `index`.
    pub fn token(&self, index: usize) -> Result<&Token> {
        if index == 0 || index > self.tokens.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.tokens.len(),
            });
        }
        Ok(&self.tokens[index - 1])
    }

    pub fn head(&self, index: usize) -> Result<usize> {
        self.token(index).map(|t| t.head)
    }

    /// Index of the first token whose head is 0.
    pub fn root(&self) -> Option<usize> {
        self.tokens.iter().find(|t| t.head == 0).map(|t| t.index)
    }

    /// Indices of the direct dependents of `index`, in sentence order.
    pub fn children(&self, index: usize) -> Vec<usize> {
        self.tokens
            .iter()
            .filter(|t| t.head == index)
            .map(|t| t.index)
            .collect()
    }

    /// Length in edges of the longest root-to-leaf path. Assumes a valid tree.
    pub fn depth(&self) -> usize {
        (1..=self.len())
            .map(|i| {
                let mut d = 0;
                let mut cur = i;
                while let Ok(t) = self.token(cur) {
                    if t.head == 0 || d > self.len() {
                        break;
                    }
                    cur = t.head;
                    d += 1;
                }
                d
            })
            .max()
            .unwrap_or(0)
    }

    /// Number of tokens in the subtree rooted at `index`, including itself.
    pub fn subtree_size(&self, index: usize) -> usize {
        let mut size = 0;
        let mut stack = vec![index];
        while let Some(node) = stack.pop() {
            size += 1;
            stack.extend(self.children(node));
            if size > self.len() {
                break;
            }
        }
        size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Empty,
    BadIndex,
    HeadOutOfRange,
    SelfLoop,
    EmptyDeprel,
    NoRoot,
    MultipleRoots,
    Cycle,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::Empty => "empty sentence",
            ViolationKind::BadIndex => "non-sequential token index",
            ViolationKind::HeadOutOfRange => "head out of range",
            ViolationKind::SelfLoop => "self-loop",
            ViolationKind::EmptyDeprel => "empty deprel",
            ViolationKind::NoRoot => "no root",
            ViolationKind::MultipleRoots => "multiple roots",
            ViolationKind::Cycle => "cycle",
        };
        f.write_str(s)
    }
}

/// First invariant a tree breaks, with the offending token (0 when no single token is at fault).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub token: usize,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at token {}", self.kind, self.token)
    }
}

pub fn validate_tree(t: &DependencyTree) -> std::result::Result<(), Violation> {
    let n = t.len();
    let fail = |kind, token| Err(Violation { kind, token });
    if n == 0 {
        return fail(ViolationKind::Empty, 0);
    }
    for (pos, tok) in t.tokens.iter().enumerate() {
        if tok.index != pos + 1 {
            return fail(ViolationKind::BadIndex, pos + 1);
        }
        if tok.head > n {
            return fail(ViolationKind::HeadOutOfRange, tok.index);
        }
        if tok.head == tok.index {
            return fail(ViolationKind::SelfLoop, tok.index);
        }
        if tok.deprel.is_empty() {
            return fail(ViolationKind::EmptyDeprel, tok.index);
        }
    }
    let mut roots = t.tokens.iter().filter(|tok| tok.head == 0);
    if roots.next().is_none() {
        return fail(ViolationKind::NoRoot, 0);
    }
    if let Some(second) = roots.next() {
        return fail(ViolationKind::MultipleRoots, second.index);
    }
    // With a single root and in-range heads, a walk longer than n steps means a cycle.
    for tok in &t.tokens {
        let mut cur = tok.index;
        let mut steps = 0;
        while cur != 0 {
            cur = t.tokens[cur - 1].head;
            steps += 1;
            if steps > n {
                return fail(ViolationKind::Cycle, tok.index);
            }
        }
    }
    Ok(())
}

pub fn check_tree(t: &DependencyTree) -> Result<()> {
    validate_tree(t).map_err(|v| Error::InvalidTree(v.to_string()))
}

pub fn parse_conllu(text: &str) -> Result<Vec<DependencyTree>> {
    let mut trees = Vec::new();
    let mut current = DependencyTree::default();
    let mut doc_id: Option<String> = None;
    let mut in_block = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            if in_block {
                trees.push(std::mem::take(&mut current));
                in_block = false;
            }
            continue;
        }
        if !in_block {
            current.doc_id = doc_id.clone();
            in_block = true;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((key, value)) = comment.split_once('=') {
                match key.trim() {
                    "sent_id" => current.sent_id = Some(value.trim().to_string()),
                    "newdoc id" => {
                        doc_id = Some(value.trim().to_string());
                        current.doc_id = doc_id.clone();
                    }
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        // multi-word token ranges and empty nodes carry no head of their own
        if cols[0].contains('-') || cols[0].contains('.') {
            continue;
        }
        let index: usize = cols[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("non-integer ID {:?}", cols[0]),
        })?;
        let head: usize = cols[6].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("non-integer HEAD {:?}", cols[6]),
        })?;
        current.tokens.push(Token {
            index,
            form: cols[1].to_string(),
            upos: cols[3].to_string(),
            head,
            deprel: cols[7].to_string(),
        });
    }
    if in_block {
        trees.push(current);
    }
    Ok(trees)
}

/// Writes trees as CoNLL-U; unused columns are `_`.
pub fn to_conllu(trees: &[DependencyTree]) -> String {
    let mut out = String::new();
    let mut last_doc: Option<&str> = None;
    for t in trees {
        if let Some(doc) = t.doc_id.as_deref() {
            if last_doc != Some(doc) {
                out.push_str(&format!("# newdoc id = {doc}\n"));
                last_doc = Some(doc);
            }
        }
        if let Some(id) = &t.sent_id {
            out.push_str(&format!("# sent_id = {id}\n"));
        }
        for tok in &t.tokens {
            out.push_str(&format!(
                "{}\t{}\t_\t{}\t_\t_\t{}\t{}\t_\t_\n",
                tok.index, tok.form, tok.upos, tok.head, tok.deprel
            ));
        }
        out.push('\n');
    }
    out
}

/// Inclusive 1-based token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn single(index: usize) -> Self {
        Span::new(index, index)
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    fn check(&self, t: &DependencyTree) -> Result<()> {
        if self.start == 0 || self.start > self.end {
            return Err(Error::Span(format!("empty span {}..={}", self.start, self.end)));
        }
        if self.end > t.len() {
            return Err(Error::Span(format!(
                "span {}..={} exceeds sentence length {}",
                self.start,
                self.end,
                t.len()
            )));
        }
        Ok(())
    }
}

/// The head token of an entity mention: the token whose head lies outside the span,
/// leftmost if there are several.
pub fn resolve_entity_head(t: &DependencyTree, span: Span) -> Result<usize> {
    span.check(t)?;
    let head = (span.start..=span.end)
        .find(|&i| !span.contains(t.tokens[i - 1].head))
        .unwrap_or(span.start);
    Ok(head)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "12")]
    E1ToE2,
    #[serde(rename = "21")]
    E2ToE1,
}

impl Direction {
    pub fn flip(self) -> Self {
        match self {
            Direction::E1ToE2 => Direction::E2ToE1,
            Direction::E2ToE1 => Direction::E1ToE2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::E1ToE2 => "12",
            Direction::E2ToE1 => "21",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    #[serde(rename = "type")]
    pub etype: String,
}

impl EntityMention {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

/// One line of the instance sidecar file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub sent_id: String,
    pub e1: EntityMention,
    pub e2: EntityMention,
    pub label: String,
    pub direction: Option<Direction>,
    /// Article id used for splitting; falls back to the tree's `newdoc id`, then to `sent_id`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article: Option<String>,
    /// Optional fixed split assignment ("train", "dev" or "test").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// 1-based line in the source file, 0 when not read from a file.
    #[serde(skip)]
    pub line: usize,
}

pub fn parse_instance_jsonl(text: &str) -> Result<Vec<InstanceRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let mut rec: InstanceRecord = serde_json::from_str(l).map_err(|e| Error::Parse {
                line: i + 1,
                msg: e.to_string(),
            })?;
            rec.line = i + 1;
            Ok(rec)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub sent_id: String,
    pub article: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    pub sentence: DependencyTree,
    pub e1: EntityMention,
    pub e2: EntityMention,
    pub label: String,
    pub direction: Option<Direction>,
}

impl RelationInstance {
    /// Checks spans, the label against `relations` (plus "Other") and the direction rule.
    pub fn validate(&self, relations: &[String]) -> Result<()> {
        let (s1, s2) = (self.e1.span(), self.e2.span());
        s1.check(&self.sentence)?;
        s2.check(&self.sentence)?;
        if s1.overlaps(&s2) {
            return Err(Error::Span(format!(
                "entity spans {}..={} and {}..={} overlap",
                s1.start, s1.end, s2.start, s2.end
            )));
        }
        if self.label == OTHER {
            if self.direction.is_some() {
                return Err(Error::InvalidArgument(
                    "label \"Other\" must have a null direction".into(),
                ));
            }
        } else if !relations.iter().any(|r| r == &self.label) {
            return Err(Error::UnknownLabel(self.label.clone()));
        } else if self.direction.is_none() {
            return Err(Error::InvalidArgument(format!(
                "label {:?} needs a direction",
                self.label
            )));
        }
        Ok(())
    }

    /// Head tokens of the two entity mentions.
    pub fn entity_heads(&self) -> Result<(usize, usize)> {
        Ok((
            resolve_entity_head(&self.sentence, self.e1.span())?,
            resolve_entity_head(&self.sentence, self.e2.span())?,
        ))
    }
}

/// Joins sidecar records to their trees by `sent_id`, validating both.
///
/// Trees without a `sent_id` comment are addressed by their 1-based ordinal.
pub fn attach_instances(
    trees: &[DependencyTree],
    records: &[InstanceRecord],
    relations: &[String],
) -> Result<Vec<RelationInstance>> {
    let mut by_id: HashMap<String, &DependencyTree> = HashMap::new();
    for (i, t) in trees.iter().enumerate() {
        let id = t.sent_id.clone().unwrap_or_else(|| (i + 1).to_string());
        by_id.insert(id, t);
    }
    records
        .iter()
        .enumerate()
        .map(|(i, rec)| {
            let line = if rec.line > 0 { rec.line } else { i + 1 };
            let at_line = |e: Error| Error::Parse {
                line,
                msg: e.to_string(),
            };
            let tree = by_id.get(&rec.sent_id).ok_or_else(|| Error::Parse {
                line,
                msg: format!("unknown sent_id {:?}", rec.sent_id),
            })?;
            check_tree(tree).map_err(at_line)?;
            let article = rec
                .article
                .clone()
                .or_else(|| tree.doc_id.clone())
                .unwrap_or_else(|| rec.sent_id.clone());
            let inst = RelationInstance {
                sent_id: rec.sent_id.clone(),
                article,
                split: rec.split.clone(),
                sentence: (*tree).clone(),
                e1: rec.e1.clone(),
                e2: rec.e2.clone(),
                label: rec.label.clone(),
                direction: rec.direction,
            };
            inst.validate(relations).map_err(at_line)?;
            let (h1, h2) = inst.entity_heads().map_err(at_line)?;
            if h1 == h2 {
                return Err(at_line(Error::DegeneratePair(h1)));
            }
            Ok(inst)
        })
        .collect()
}

pub fn default_relations() -> Vec<String> {
    RELATION_TAGS.iter().map(|s| s.to_string()).collect()
}
