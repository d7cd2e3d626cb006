//! Acceptance checks, one PASS/FAIL line each. Run with
//! `cargo test --release --test acceptance`.
//!
//! The corpus-scale comparison runs only when `SRBRCNN_CORPUS_STORE` names a
//! store written by `srbrcnn preprocess`; otherwise it is reported as SKIP.

mod common;

use std::collections::{BTreeSet, VecDeque};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srbrcnn::brcnn::{decode, end_to_end_check, DirectedLabel, LabelSchema, Mode, Model, ModelDims, Vocab};
use srbrcnn::evalcli::ablation::ablate;
use srbrcnn::evalcli::store::Store;
use srbrcnn::neuralcore::{primitive_suite, softmax};
use srbrcnn::structreg::{extract_sdp, flatten, CutStrategy, SRCUT};
use srbrcnn::synth::{reference_tree, overfit_dataset, random_tree};
use srbrcnn::trainer::{evaluate, init_model, prepare, train_epoch, AdaDeltaState, TrainConfig};
use srbrcnn::treebank::{validate_tree, DependencyTree};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

use Outcome::*;

/// Name, optional time limit, and the check itself.
type Criterion = (&'static str, Option<Duration>, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn within(limit: Duration, elapsed: Duration, outcome: Outcome) -> Outcome {
    match outcome {
        Pass(d) if elapsed > limit => Fail(format!("{d}; took {elapsed:.2?}, limit {limit:?}")),
        Pass(d) => Pass(format!("{d}; {elapsed:.2?}")),
        other => other,
    }
}

fn bfs_path(t: &DependencyTree, a: usize, b: usize) -> Vec<usize> {
    let mut adj = vec![vec![]; t.len() + 1];
    for tok in t.tokens.iter().filter(|t| t.head != 0) {
        adj[tok.index].push(tok.head);
        adj[tok.head].push(tok.index);
    }
    let mut prev = vec![usize::MAX; t.len() + 1];
    prev[a] = a;
    let mut queue = VecDeque::from([a]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if prev[v] == usize::MAX {
                prev[v] = u;
                queue.push_back(v);
            }
        }
    }
    let mut path = vec![b];
    while *path.last().unwrap() != a {
        path.push(prev[*path.last().unwrap()]);
    }
    path.reverse();
    path
}

fn depth(t: &DependencyTree) -> usize {
    (1..=t.len())
        .map(|mut i| {
            let mut d = 0;
            while t.tokens[i - 1].head != 0 {
                i = t.tokens[i - 1].head;
                d += 1;
            }
            d
        })
        .max()
        .unwrap_or(0)
}

fn sdp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut pairs, mut mismatches) = (0, 0);
    for _ in 0..500 {
        let n = rng.gen_range(1..=12);
        let t = random_tree(n, &mut rng);
        for a in 1..=n {
            for b in (1..=n).filter(|&b| b != a) {
                pairs += 1;
                match extract_sdp(&t, a, b) {
                    Ok(p) if p.indices() == bfs_path(&t, a, b) => {}
                    _ => mismatches += 1,
                }
            }
        }
    }
    check(mismatches == 0, format!("{pairs} node pairs, {mismatches} mismatches"))
}

fn reference_tree_paths() -> Outcome {
    let t = reference_tree();
    let words = |p: &srbrcnn::structreg::SdpPath| p.indices().iter().map(|&i| t.tokens[i - 1].form.clone()).collect::<Vec<_>>();
    let plain = words(&extract_sdp(&t, 2, 7).unwrap());
    let e = t.tokens.iter().find(|x| x.form == "e").unwrap().index;
    let cuts = BTreeSet::from([e]);
    let flat = flatten(&t, &cuts).unwrap();
    let cut = words(&extract_sdp(&flat, 2, 7).unwrap());
    let ok = plain == ["b", "a", "c", "e", "g"] && cut == ["b", "a", "e", "g"] && validate_tree(&flat).is_ok();
    check(ok, format!("plain {plain:?}, after cutting e {cut:?}"))
}

fn gradient_suite() -> Outcome {
    let (step, tol) = (1e-4, 1e-4);
    let mut worst = 0.0f64;
    let mut failures = vec![];
    for seed in 0..3 {
        match primitive_suite(seed, step, tol) {
            Ok(reports) => {
                for (name, r) in reports {
                    worst = worst.max(r.max_rel_error);
                    if !r.passed {
                        failures.push(format!("{name}@{seed}"));
                    }
                }
            }
            Err(e) => failures.push(format!("suite@{seed}: {e}")),
        }
        match end_to_end_check(seed, step, tol) {
            Ok(r) => {
                worst = worst.max(r.max_rel_error);
                if !r.passed {
                    failures.push(format!("brcnn_loss@{seed}"));
                }
            }
            Err(e) => failures.push(format!("brcnn_loss@{seed}: {e}")),
        }
    }
    check(
        failures.is_empty(),
        format!("5 primitives + end-to-end loss, 3 seeds, max rel err {worst:.2e}, failures {failures:?}"),
    )
}

fn analytic_loss() -> Outcome {
    let t = reference_tree();
    let words = Vocab::words(t.tokens.iter().map(|t| t.form.as_str()));
    let rels = Vocab::relations(t.tokens.iter().map(|t| t.deprel.as_str()));
    let schema = LabelSchema::default();
    let k = schema.k();
    let dims = ModelDims {
        word_dim: 6,
        rel_dim: 4,
        conv_dim: 7,
    };
    let model = Model::zeroed(schema, words, rels, dims, 0.5, None);
    let path = extract_sdp(&t, 2, 7).unwrap();
    let expected = 2.0 * 19f64.ln() + 10f64.ln();
    let mut worst = 0.0f64;
    for gold in 0..19 {
        let l = model.loss_value(&path, DirectedLabel(gold), 0.0, Mode::Eval).unwrap();
        worst = worst.max((l - expected).abs());
    }
    check(k == 9 && worst < 1e-9, format!("K = {k}, expected {expected:.12}, max deviation {worst:.1e}"))
}

fn z_algebra() -> Outcome {
    let s = LabelSchema::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut failures = 0;
    for _ in 0..1000 {
        let raw: Vec<f64> = (0..19).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let d: Vec<f64> = raw.iter().map(|v| v / total).collect();
        if s.z_map(&s.z_map(&d).unwrap()).unwrap() != d {
            failures += 1;
        }
        let f: Vec<f64> = (0..19).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let b: Vec<f64> = (0..19).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let pf = softmax(&f);
        let argmax = (0..19).fold(0, |best, i| if pf[i] > pf[best] { i } else { best });
        if decode(&s, &f, &b, 1.0).unwrap().0 != DirectedLabel(argmax) {
            failures += 1;
        }
        // agreement: backward peaks at the swapped index of the forward peak
        let c = rng.gen_range(0..19);
        let mut fa = vec![0.0; 19];
        let mut ba = vec![0.0; 19];
        fa[c] = 3.0;
        ba[DirectedLabel(c).swapped().0] = 3.0;
        for alpha in [0.0, 0.25, 0.5, 0.75, 1.0] {
            if decode(&s, &fa, &ba, alpha).unwrap().0 != DirectedLabel(c) {
                failures += 1;
            }
        }
    }
    check(failures == 0, format!("1000 distributions, {failures} failures"))
}

fn overfit() -> Outcome {
    let cfg = TrainConfig {
        lambda: 0.0,
        keep_prob: 1.0,
        epochs: 200,
        batch_size: 2,
        seed: 7,
        patience: 1000,
        dims: ModelDims {
            word_dim: 16,
            rel_dim: 8,
            conv_dim: 16,
        },
        ..TrainConfig::default()
    };
    let (schema, instances) = overfit_dataset(20, 4, 11);
    let mut model = init_model(schema.clone(), &instances, &cfg);
    let (data, skipped) = prepare(&schema, None, &instances);
    if !skipped.is_empty() {
        return Fail(format!("{} fixture instances unusable", skipped.len()));
    }
    let mut state = AdaDeltaState::for_params(&model.params, cfg.rho, cfg.eps).unwrap();
    let mut losses = vec![];
    for epoch in 1..=cfg.epochs {
        match train_epoch(&mut model, &mut state, &data, &cfg, epoch) {
            Ok(l) => losses.push(l),
            Err(e) => return Fail(format!("epoch {epoch}: {e}")),
        }
    }
    let acc = evaluate(&model, &data).unwrap().accuracy;
    let drop = 1.0 - losses[49] / losses[0];
    check(
        acc >= 0.95 && drop >= 0.5,
        format!("train accuracy {acc:.3}, loss {:.4} -> {:.4} by epoch 50 ({:.0}% lower)", losses[0], losses[49], 100.0 * drop),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let store = common::make_store(dir.path(), 30, 3, 21);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["train", "--data", store.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(&["--epochs", "4", "--seed", "13", "--strategy", "random"]);
        args.extend_from_slice(common::SMALL);
        let o = common::run(&args);
        assert!(o.status.success(), "{}", common::stderr(&o));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let read = |p: std::path::PathBuf| std::fs::read(p).unwrap();
    // the last column is wall-clock time
    let stable = |p: std::path::PathBuf| -> Vec<String> {
        String::from_utf8(read(p))
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect()
    };
    let same_best = read(a.join("best.ckpt")) == read(b.join("best.ckpt"));
    let same_epochs = (1..=4).all(|e| {
        let f = format!("epoch_{e}.ckpt");
        read(a.join(&f)) == read(b.join(&f))
    });
    let same_log = stable(a.join("train_log.csv")) == stable(b.join("train_log.csv"));
    check(
        same_best && same_epochs && same_log,
        format!("best.ckpt identical: {same_best}, epoch checkpoints identical: {same_epochs}, logs identical apart from timing: {same_log}"),
    )
}

fn flatten_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4048);
    let mut failures = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=12);
        let t = random_tree(n, &mut rng);
        let root = t.root().unwrap();
        let cuts: BTreeSet<usize> = (1..=n).filter(|&i| i != root && rng.gen_bool(0.3)).collect();
        let Ok(f) = flatten(&t, &cuts) else {
            failures += 1;
            continue;
        };
        let mut before: Vec<_> = t.tokens.iter().map(|x| (x.index, x.form.clone())).collect();
        let mut after: Vec<_> = f.tokens.iter().map(|x| (x.index, x.form.clone())).collect();
        before.sort();
        after.sort();
        let heads_ok = t.tokens.iter().zip(&f.tokens).all(|(x, y)| {
            if cuts.contains(&x.index) {
                y.head == root && y.deprel == SRCUT
            } else {
                x == y
            }
        });
        if before != after || !heads_ok || depth(&f) > depth(&t) || validate_tree(&f).is_err() {
            failures += 1;
        }
    }
    check(failures == 0, format!("500 trees, {failures} failures"))
}

fn corpus_comparison() -> Outcome {
    let Ok(path) = std::env::var("SRBRCNN_CORPUS_STORE") else {
        return Skip("set SRBRCNN_CORPUS_STORE to a preprocessed corpus store to run".into());
    };
    let store = match Store::read(std::path::Path::new(&path)) {
        Ok(s) => s,
        Err(e) => return Fail(format!("{path}: {e}")),
    };
    let cfg = TrainConfig::default();
    let strategies = [None, Some(CutStrategy::Preposition)];
    match ablate(
        &store.schema,
        &store.split("train"),
        &store.split("dev"),
        &store.split("test"),
        &strategies,
        &cfg,
    ) {
        Ok(rows) => check(
            rows[1].dev_macro_f1 > rows[0].dev_macro_f1,
            format!("dev macro-F1 none {:.4}, preposition {:.4}", rows[0].dev_macro_f1, rows[1].dev_macro_f1),
        ),
        Err(e) => Fail(e.to_string()),
    }
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("sdp equals BFS shortest path on random trees", Some(Duration::from_secs(10)), sdp_oracle),
        ("reference tree paths before and after cutting", None, reference_tree_paths),
        ("finite-difference gradient suite", Some(Duration::from_secs(60)), gradient_suite),
        ("zero model loss is 2 ln 19 + ln 10", None, analytic_loss),
        ("z-map involution and decode algebra", None, z_algebra),
        ("overfits a 20-instance fixture", Some(Duration::from_secs(120)), overfit),
        ("same-seed train runs are identical", None, determinism),
        ("flattening invariants on random trees", None, flatten_invariants),
        ("preposition cuts beat no cuts on the corpus", None, corpus_comparison),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut outcome = f();
        if let Some(limit) = limit {
            outcome = within(*limit, start.elapsed(), outcome);
        }
        let (tag, detail) = match outcome {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {}. {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
