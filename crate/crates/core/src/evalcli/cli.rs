//! `srbrcnn` command line.
//!
//! Exit codes: 0 success, 1 data error, 2 usage error, 3 numeric failure
//! (non-finite loss or a failed gradient check).

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use super::ablation::{ablate, rows_csv, rows_table};
use super::metrics::{prf1, MetricsReport};
use super::store::{assign_splits, Store, StoreHeader, DEFAULT_SPLIT_RATIOS};
use crate::brcnn::{checkpoint, end_to_end_check, LabelSchema, Model, ModelDims};
use crate::error::{Error, Result};
use crate::neuralcore::primitive_suite;
use crate::structreg::{sr_sdp, CutStrategy, SdpRecord, DEFAULT_CUT_RATIO};
use crate::trainer::{self, fit_with_progress, init_model, load_word_vectors, prepare, seeds, TrainConfig};
use crate::treebank::{
    attach_instances, default_relations, parse_conllu, parse_instance_jsonl, Direction, RelationInstance,
};

#[derive(Debug, Parser)]
#[command(name = "srbrcnn", version, about = "Structure-regularized BRCNN relation classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate CoNLL-U trees and instance records and write an instance store.
    Preprocess(PreprocessArgs),
    /// Print shortest dependency paths as JSON lines.
    Sdp(SdpArgs),
    /// Train a model and write checkpoints plus a CSV log.
    Train(TrainArgs),
    /// Score a checkpoint on one split of a store.
    Eval(EvalArgs),
    /// Write per-instance predictions as JSON lines.
    Predict(PredictArgs),
    /// Run the finite-difference gradient suite.
    Gradcheck(GradcheckArgs),
    /// Train once per cut strategy and tabulate the results.
    Ablate(AblateArgs),
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    conllu: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated relation names (default: the nine corpus tags).
    #[arg(long, value_delimiter = ',')]
    relations: Option<Vec<String>>,
    /// Train/dev/test proportions over articles, e.g. 695,58,84.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SPLIT_RATIOS)]
    split_ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct StrategyArgs {
    /// none, punctuation, random or preposition.
    #[arg(long, default_value = "none")]
    strategy: String,
    #[arg(long, default_value_t = DEFAULT_CUT_RATIO)]
    cut_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl StrategyArgs {
    fn resolve(&self) -> Result<Option<CutStrategy>> {
        CutStrategy::parse(&self.strategy, self.cut_ratio, self.seed.wrapping_add(seeds::CUT))
    }
}

#[derive(Debug, Args)]
struct SdpArgs {
    /// Instance store; alternatively give --conllu and --instances.
    #[arg(long, conflicts_with_all = ["conllu", "instances"])]
    data: Option<PathBuf>,
    #[arg(long, requires = "instances")]
    conllu: Option<PathBuf>,
    #[arg(long, requires = "conllu")]
    instances: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    relations: Option<Vec<String>>,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HyperArgs {
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 0.5)]
    keep_prob: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0.95)]
    rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 200)]
    word_dim: usize,
    #[arg(long, default_value_t = 50)]
    rel_dim: usize,
    #[arg(long, default_value_t = 200)]
    conv_dim: usize,
    /// Pretrained word vectors in word2vec text format.
    #[arg(long)]
    embeddings: Option<PathBuf>,
}

impl HyperArgs {
    fn config(&self, seed: u64, strategy: Option<CutStrategy>) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            keep_prob: self.keep_prob,
            rho: self.rho,
            eps: self.eps,
            epochs: self.epochs,
            batch_size: self.batch,
            seed,
            alpha: self.alpha,
            strategy,
            patience: self.patience,
            dims: ModelDims {
                word_dim: self.word_dim,
                rel_dim: self.rel_dim,
                conv_dim: self.conv_dim,
            },
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Output directory for checkpoints and train_log.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Write the full report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write per-class scores as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Instances as JSON lines (an instance store is accepted too).
    #[arg(long)]
    input: PathBuf,
    /// Only predict instances of this split.
    #[arg(long)]
    split: Option<String>,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated strategies to compare.
    #[arg(long, value_delimiter = ',', default_value = "none,punctuation,random,preposition")]
    strategies: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_CUT_RATIO)]
    cut_ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    hyper: HyperArgs,
    /// Write the table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) => 3,
        Error::File { source, .. } => exit_code(source),
        _ => 1,
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Preprocess(a) => preprocess(a),
        Command::Sdp(a) => sdp(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Ablate(a) => ablate_cmd(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::from(e).in_file(path))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(Error::from),
    }
}

fn load_raw(conllu: &Path, instances: &Path, relations: &[String]) -> Result<Vec<RelationInstance>> {
    let trees = parse_conllu(&read(conllu)?).map_err(|e| e.in_file(conllu))?;
    let records = parse_instance_jsonl(&read(instances)?).map_err(|e| e.in_file(instances))?;
    attach_instances(&trees, &records, relations).map_err(|e| e.in_file(instances))
}

fn preprocess(a: PreprocessArgs) -> Result<i32> {
    let schema = LabelSchema::new(a.relations.unwrap_or_else(default_relations))?;
    let mut instances = load_raw(&a.conllu, &a.instances, schema.relations())?;
    let ratios: [f64; 3] = a.split_ratios.as_slice().try_into().map_err(|_| {
        Error::InvalidArgument(format!(
            "--split-ratios needs three comma-separated values, got {}",
            a.split_ratios.len()
        ))
    })?;
    assign_splits(&mut instances, ratios, a.seed.wrapping_add(seeds::SPLIT))?;
    let store = Store { schema, instances };
    store.write(&a.out)?;
    let count = |s: &str| store.instances.iter().filter(|i| i.split.as_deref() == Some(s)).count();
    println!(
        "wrote {} instances (train {}, dev {}, test {}) to {}",
        store.instances.len(),
        count("train"),
        count("dev"),
        count("test"),
        a.out.display()
    );
    Ok(0)
}

fn sdp(a: SdpArgs) -> Result<i32> {
    let instances = match (&a.data, &a.conllu, &a.instances) {
        (Some(d), _, _) => Store::read(d)?.instances,
        (None, Some(c), Some(i)) => {
            let relations = a.relations.clone().unwrap_or_else(default_relations);
            load_raw(c, i, &relations)?
        }
        _ => {
            return Err(Error::InvalidArgument(
                "give either --data or both --conllu and --instances".into(),
            ))
        }
    };
    let strategy = a.strategy.resolve()?;
    let mut out = String::new();
    for inst in &instances {
        let (h1, h2) = inst.entity_heads()?;
        let path = sr_sdp(&inst.sentence, strategy.as_ref(), h1, h2)
            .map_err(|e| Error::InvalidArgument(format!("{}: {e}", inst.sent_id)))?;
        out += &serde_json::to_string(&SdpRecord::new(&inst.sent_id, strategy.as_ref(), &path))?;
        out.push('\n');
    }
    emit(a.out.as_deref(), &out)?;
    Ok(0)
}

fn split_examples(
    schema: &LabelSchema,
    strategy: Option<&CutStrategy>,
    name: &str,
    instances: &[RelationInstance],
) -> Result<Vec<trainer::Example>> {
    let (data, skipped) = prepare(schema, strategy, instances);
    for (id, e) in &skipped {
        eprintln!("warning: skipping {name} instance {id}: {e}");
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument(format!("the {name} split has no usable instances")));
    }
    Ok(data)
}

fn train(a: TrainArgs) -> Result<i32> {
    let store = Store::read(&a.data)?;
    let strategy = a.strategy.resolve()?;
    let config = a.hyper.config(a.strategy.seed, strategy);
    config.validate()?;
    let train_inst = store.split("train");
    let dev_inst = store.split("dev");
    let train_ex = split_examples(&store.schema, strategy.as_ref(), "train", &train_inst)?;
    let dev_ex = split_examples(&store.schema, strategy.as_ref(), "dev", &dev_inst)?;

    let mut model = init_model(store.schema.clone(), &train_inst, &config);
    if let Some(path) = &a.hyper.embeddings {
        let (table, covered) = load_word_vectors(
            path,
            model.word_vocab.items(),
            config.dims.word_dim,
            config.seed.wrapping_add(seeds::VECTORS),
        )?;
        eprintln!("pretrained vectors cover {covered} of {} words", model.word_vocab.len());
        model.params.word_table = table;
    }
    eprintln!(
        "training on {} instances, {} dev, strategy {}",
        train_ex.len(),
        dev_ex.len(),
        strategy.map_or_else(|| "none".to_string(), |s| s.to_string())
    );
    let outcome = fit_with_progress(model, &train_ex, &dev_ex, &config, Some(&a.out), |r| {
        eprintln!(
            "epoch {:>3}  loss {:.5}  dev macro-F1 {:.4}  ({:.1}s)",
            r.epoch, r.mean_loss, r.dev_macro_f1, r.seconds
        );
    })?;
    println!(
        "best dev macro-F1 {:.4} at epoch {}{}; checkpoint {}",
        outcome.best_dev_f1,
        outcome.best_epoch,
        if outcome.stopped_early { " (stopped early)" } else { "" },
        a.out.join("best.ckpt").display()
    );
    Ok(0)
}

/// Rejects data whose label set differs from the checkpoint's.
fn check_compatible(model: &Model, data: &LabelSchema) -> Result<()> {
    if model.schema.relations() != data.relations() {
        return Err(Error::Schema(format!(
            "checkpoint has K = {} relations {:?} but the data has K = {} relations {:?}",
            model.schema.k(),
            model.schema.relations(),
            data.k(),
            data.relations()
        )));
    }
    Ok(())
}

/// Scores `instances` the same way `predict` followed by [`prf1`] would.
pub fn score(model: &Model, instances: &[RelationInstance]) -> Result<MetricsReport> {
    let gold = instances
        .iter()
        .map(|i| model.schema.of_instance(i))
        .collect::<Result<Vec<_>>>()?;
    let pred = instances
        .par_iter()
        .map(|i| model.predict(i).map(|p| p.decoded))
        .collect::<Result<Vec<_>>>()?;
    prf1(&pred, &gold, &model.schema)
}

fn eval(a: EvalArgs) -> Result<i32> {
    let model = checkpoint::load(&a.ckpt)?;
    let store = Store::read(&a.data)?;
    check_compatible(&model, &store.schema)?;
    let instances = store.split(&a.split);
    if instances.is_empty() {
        return Err(Error::InvalidArgument(format!("split {:?} is empty", a.split)));
    }
    let report = score(&model, &instances)?;
    print!("{}", report.render());
    if let Some(p) = &a.json {
        write(p, &serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(p) = &a.csv {
        write(p, &report.to_csv())?;
    }
    Ok(0)
}

/// One line of `predict` output.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct PredictionRecord {
    pub sent_id: String,
    /// Directed class index: 0 Other, 2i+1 relation i e1→e2, 2i+2 e2→e1.
    pub class: usize,
    pub label: String,
    pub direction: Option<Direction>,
    pub gold_label: String,
    pub gold_direction: Option<Direction>,
    /// Mixed directed distribution used for the decision.
    pub probs: Vec<f64>,
}

fn predict(a: PredictArgs) -> Result<i32> {
    let model = checkpoint::load(&a.ckpt)?;
    let text = read(&a.input)?;
    let mut instances = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let at = |e: &dyn std::fmt::Display| {
            Error::Parse {
                line: n + 1,
                msg: e.to_string(),
            }
            .in_file(&a.input)
        };
        if n == 0 {
            if let Ok(header) = serde_json::from_str::<StoreHeader>(line) {
                let schema = LabelSchema::new(header.relations).map_err(|e| at(&e))?;
                check_compatible(&model, &schema)?;
                continue;
            }
        }
        let inst: RelationInstance = serde_json::from_str(line).map_err(|e| at(&e))?;
        inst.validate(model.schema.relations()).map_err(|e| at(&e))?;
        if a.split.as_ref().is_none_or(|s| inst.split.as_ref() == Some(s)) {
            instances.push(inst);
        }
    }
    let preds = instances
        .par_iter()
        .map(|i| model.predict(i))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    for (inst, p) in instances.iter().zip(preds) {
        let (label, direction) = model.schema.describe(p.decoded);
        let rec = PredictionRecord {
            sent_id: inst.sent_id.clone(),
            class: p.decoded.0,
            label,
            direction,
            gold_label: inst.label.clone(),
            gold_direction: inst.direction,
            probs: p.directed,
        };
        out += &serde_json::to_string(&rec)?;
        out.push('\n');
    }
    emit(a.output.as_deref(), &out)?;
    Ok(0)
}

fn gradcheck(a: GradcheckArgs) -> Result<i32> {
    let mut reports = primitive_suite(a.seed, a.step, a.tolerance)?;
    reports.push(("brcnn_loss", end_to_end_check(a.seed, a.step, a.tolerance)?));
    let mut worst = 0.0f64;
    let mut ok = true;
    for (name, r) in &reports {
        println!(
            "{:<14} {}  max relative error {:.3e} over {} coordinates",
            name,
            if r.passed { "ok  " } else { "FAIL" },
            r.max_rel_error,
            r.checked
        );
        worst = worst.max(r.max_rel_error);
        ok &= r.passed;
    }
    println!("max relative error {worst:.3e} (tolerance {:.0e})", a.tolerance);
    Ok(if ok { 0 } else { 3 })
}

fn ablate_cmd(a: AblateArgs) -> Result<i32> {
    let store = Store::read(&a.data)?;
    let strategies = a
        .strategies
        .iter()
        .map(|s| CutStrategy::parse(s.trim(), a.cut_ratio, a.seed.wrapping_add(seeds::CUT)))
        .collect::<Result<Vec<_>>>()?;
    let config = a.hyper.config(a.seed, None);
    config.validate()?;
    if a.hyper.embeddings.is_some() {
        return Err(Error::InvalidArgument("--embeddings is not supported by ablate".into()));
    }
    let rows = ablate(
        &store.schema,
        &store.split("train"),
        &store.split("dev"),
        &store.split("test"),
        &strategies,
        &config,
    )?;
    print!("{}", rows_table(&rows));
    if let Some(p) = &a.out {
        write(p, &rows_csv(&rows))?;
    }
    Ok(0)
}
