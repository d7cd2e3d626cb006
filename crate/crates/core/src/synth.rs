//! Synthetic trees and relation instances for tests, smoke runs and the
//! `gradcheck` subcommand.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::brcnn::LabelSchema;
use crate::treebank::{DependencyTree, Direction, EntityMention, RelationInstance, Token};

const UPOS: [&str; 6] = ["NOUN", "VERB", "ADP", "PUNCT", "DET", "ADJ"];
const DEPRELS: [&str; 6] = ["nsubj", "obj", "obl", "nmod", "amod", "punct"];

/// Root a with children b, c; c with children d, e; e with children f, g
/// (indices a=1 … g=7).
pub fn reference_tree() -> DependencyTree {
    let mut t = DependencyTree::from_rows(&[
        ("a", "VERB", 0, "root"),
        ("b", "NOUN", 1, "nsubj"),
        ("c", "VERB", 1, "obj"),
        ("d", "NOUN", 3, "nmod"),
        ("e", "VERB", 3, "ccomp"),
        ("f", "ADV", 5, "advmod"),
        ("g", "NOUN", 5, "obj"),
    ]);
    t.sent_id = Some("reftree".to_string());
    t
}

/// Random recursive tree on `n` nodes with a shuffled labelling, so the root
/// can sit anywhere in the sentence.
pub fn random_tree<R: Rng>(n: usize, rng: &mut R) -> DependencyTree {
    assert!(n >= 1);
    // node k (in insertion order) attaches to a uniformly chosen earlier node
    let mut parent = vec![usize::MAX; n];
    for (k, p) in parent.iter_mut().enumerate().skip(1) {
        *p = rng.gen_range(0..k);
    }
    let mut position: Vec<usize> = (1..=n).collect();
    position.shuffle(rng);
    let mut tokens: Vec<Token> = (0..n)
        .map(|k| Token {
            index: position[k],
            form: format!("w{}", rng.gen_range(0..8)),
            upos: UPOS[rng.gen_range(0..UPOS.len())].to_string(),
            head: if k == 0 { 0 } else { position[parent[k]] },
            deprel: if k == 0 {
                "root".to_string()
            } else {
                DEPRELS[rng.gen_range(0..DEPRELS.len())].to_string()
            },
        })
        .collect();
    tokens.sort_by_key(|t| t.index);
    DependencyTree::new(tokens)
}

fn instance(
    sent_id: String,
    tree: DependencyTree,
    e1: usize,
    e2: usize,
    label: &str,
    direction: Option<Direction>,
) -> RelationInstance {
    let mention = |i: usize| EntityMention {
        start: i,
        end: i,
        etype: "ENT".to_string(),
    };
    RelationInstance {
        sent_id: sent_id.clone(),
        article: sent_id,
        split: None,
        sentence: tree,
        e1: mention(e1),
        e2: mention(e2),
        label: label.to_string(),
        direction,
    }
}

/// `n` instances over `k` relations R0..R{k-1}. Each sentence is
/// `[det] e1 trigger e2 [punct]`; the trigger word names the relation and the
/// subject/object arrangement gives the direction.
pub fn overfit_dataset(n: usize, k: usize, seed: u64) -> (LabelSchema, Vec<RelationInstance>) {
    let schema = LabelSchema::new((0..k).map(|r| format!("R{r}")).collect()).expect("k > 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let rel = i % k;
        let dir = if (i / k).is_multiple_of(2) {
            Direction::E1ToE2
        } else {
            Direction::E2ToE1
        };
        let noun_a = format!("n{}", rng.gen_range(0..6));
        let noun_b = format!("n{}", rng.gen_range(0..6));
        let trigger = format!("t{rel}");
        let (rel_1, rel_2) = match dir {
            Direction::E1ToE2 => ("nsubj", "obj"),
            Direction::E2ToE1 => ("obj", "nsubj"),
        };
        let with_det = rng.gen_bool(0.5);
        let mut rows: Vec<(String, &str, usize, &str)> = Vec::new();
        let off = usize::from(with_det);
        if with_det {
            rows.push(("the".into(), "DET", 2, "det"));
        }
        rows.push((noun_a, "NOUN", 2 + off, rel_1));
        rows.push((trigger, "VERB", 0, "root"));
        rows.push((noun_b, "NOUN", 2 + off, rel_2));
        rows.push((".".into(), "PUNCT", 2 + off, "punct"));
        let refs: Vec<(&str, &str, usize, &str)> =
            rows.iter().map(|(f, u, h, d)| (f.as_str(), *u, *h, *d)).collect();
        let mut tree = DependencyTree::from_rows(&refs);
        tree.sent_id = Some(format!("s{i}"));
        out.push(instance(
            format!("s{i}"),
            tree,
            1 + off,
            3 + off,
            schema.relations()[rel].as_str(),
            Some(dir),
        ));
    }
    (schema, out)
}

/// Instances whose plain SDP always runs through a prepositional subtree:
/// `e1 ← verb → noun → ADP → e2`, so cutting at the ADP shortens the path.
pub fn preposition_dataset(n: usize, k: usize, seed: u64) -> (LabelSchema, Vec<RelationInstance>) {
    let schema = LabelSchema::new((0..k).map(|r| format!("R{r}")).collect()).expect("k > 0");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let rel = i % k;
        let dir = if (i / k).is_multiple_of(2) {
            Direction::E1ToE2
        } else {
            Direction::E2ToE1
        };
        let a = format!("n{}", rng.gen_range(0..5));
        let m = format!("m{}", rng.gen_range(0..5));
        let b = format!("n{}", rng.gen_range(0..5));
        let verb = format!("v{rel}");
        let prep = if dir == Direction::E1ToE2 { "over" } else { "under" };
        // 1 a(nsubj→2) 2 verb(root) 3 m(obj→2) 4 prep(nmod→3) 5 b(obj→4) 6 .(punct→2)
        let mut tree = DependencyTree::from_rows(&[
            (a.as_str(), "NOUN", 2, "nsubj"),
            (verb.as_str(), "VERB", 0, "root"),
            (m.as_str(), "NOUN", 2, "obj"),
            (prep, "ADP", 3, "nmod"),
            (b.as_str(), "NOUN", 4, "obj"),
            (".", "PUNCT", 2, "punct"),
        ]);
        tree.sent_id = Some(format!("p{i}"));
        out.push(instance(
            format!("p{i}"),
            tree,
            1,
            5,
            schema.relations()[rel].as_str(),
            Some(dir),
        ));
    }
    (schema, out)
}
