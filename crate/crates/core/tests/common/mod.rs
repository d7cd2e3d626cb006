#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srbrcnn::synth::overfit_dataset;
use srbrcnn::treebank::{to_conllu, InstanceRecord};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_srbrcnn"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a synthetic corpus (`corpus.conllu`, `instances.jsonl`) with three
/// sentences per article and returns the two paths.
pub fn write_corpus(dir: &Path, n: usize, k: usize, seed: u64) -> (PathBuf, PathBuf) {
    let (_, instances) = overfit_dataset(n, k, seed);
    let trees: Vec<_> = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let mut t = inst.sentence.clone();
            t.doc_id = Some(format!("doc{}", i / 3));
            t
        })
        .collect();
    let records: Vec<String> = instances
        .iter()
        .map(|inst| {
            serde_json::to_string(&InstanceRecord {
                sent_id: inst.sent_id.clone(),
                e1: inst.e1.clone(),
                e2: inst.e2.clone(),
                label: inst.label.clone(),
                direction: inst.direction,
                article: None,
                split: None,
                line: 0,
            })
            .unwrap()
        })
        .collect();
    let conllu = dir.join("corpus.conllu");
    let jsonl = dir.join("instances.jsonl");
    std::fs::write(&conllu, to_conllu(&trees)).unwrap();
    std::fs::write(&jsonl, records.join("\n") + "\n").unwrap();
    (conllu, jsonl)
}

pub fn relations_flag(k: usize) -> String {
    (0..k).map(|r| format!("R{r}")).collect::<Vec<_>>().join(",")
}

/// Runs `preprocess` on a fresh synthetic corpus and returns the store path.
pub fn make_store(dir: &Path, n: usize, k: usize, seed: u64) -> PathBuf {
    let (conllu, jsonl) = write_corpus(dir, n, k, seed);
    let store = dir.join("store.jsonl");
    let o = run(&[
        "preprocess",
        "--conllu",
        conllu.to_str().unwrap(),
        "--instances",
        jsonl.to_str().unwrap(),
        "--relations",
        &relations_flag(k),
        "--split-ratios",
        "6,2,2",
        "--out",
        store.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    store
}

/// Small-model training flags for fast runs.
pub const SMALL: &[&str] = &[
    "--word-dim", "8", "--rel-dim", "4", "--conv-dim", "8", "--batch", "4",
];
