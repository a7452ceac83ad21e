use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use povshift::baselines::{
    train_tree_ranker, Baseline, MostCommonSelector, PronounSelector, RandomSelector, TreeConfig, TreeModel,
    TreeSelector,
};
use povshift::container::{Container, ModelKind};
use povshift::eval::human::{parse_ratings, score_ratings};
use povshift::eval::{
    ablation_run, component_scores, evaluate_document, pipeline_trace, score_conversion, ScoreReport, Stage,
};
use povshift::format::DocumentRecord;
use povshift::ingest::{
    corpus_stats, extract_corpus, filter_deictic_documents, stats_csv, GoldEdits, PovDocument, RankingExample,
};
use povshift::morph::{Conjugator, VerbDictionary};
use povshift::pipeline::{
    convert, gold_ranking_examples, gold_result, plan_conversion, ConversionResult, MentionSelector, RankerSelector,
    Resources,
};
use povshift::preprocess::{annotate, AnnotationAdapters, GoldAdapter, PerformativeLexicon};
use povshift::candidates::RelationalLexicon;
use povshift::ranker::{accuracy, train, CachedEmbedding, EmbeddingProvider, FeatureSet, HashEmbedding, Ranker};
use povshift::{ChainId, Document, EntitySpec, Error, Gender, Pov, Result};

use crate::config::Settings;
use crate::inputs::{self, Kind};
use crate::{BaselineArg, Command, Outcome};

pub fn run(command: Command, s: &Settings) -> Result<Outcome> {
    match command {
        Command::ExtractData(a) => extract(a, s),
        Command::Train(a) => cmd_train(a, s),
        Command::Convert(a) => cmd_convert(a, s),
        Command::Evaluate(a) => evaluate(a, s),
        Command::ScoreHumanEval(a) => human(a),
        Command::Ablate(a) => ablate(a, s),
        Command::Stats(a) => stats(a),
    }
}

fn provider(s: &Settings) -> Result<CachedEmbedding<HashEmbedding>> {
    CachedEmbedding::from_env(HashEmbedding::new(s.embedding_dim))
}

fn resources(s: &Settings) -> Result<Resources> {
    let mut res = Resources::builtin();
    if let Some(p) = &s.verb_dict {
        res.conjugator = Conjugator::new(VerbDictionary::load(p).map_err(|e| at(p, e))?);
    }
    if let Some(p) = &s.relational_lexicon {
        res.relational = RelationalLexicon::load(p).map_err(|e| at(p, e))?;
    }
    if let Some(p) = &s.performatives {
        res.performatives = PerformativeLexicon::load(p).map_err(|e| at(p, e))?;
    }
    Ok(res)
}

fn at(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    }
}

/// Writes to stdout; a closed pipe ends output quietly.
fn out(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => r.map_err(Error::Io),
    }
}

fn pool_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
    items.par_iter().map(f).collect()
}

// ---------------------------------------------------------------- extract-data

#[derive(Args, Debug)]
pub struct ExtractArgs {
    /// CoNLL-2012 files, benchmark JSON documents, or directories holding them
    #[arg(required = true, value_name = "INPUT")]
    inputs: Vec<PathBuf>,
    /// Ranking examples, one JSON object per line
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Also write corpus statistics as CSV
    #[arg(long, value_name = "PATH")]
    stats: Option<PathBuf>,
    /// Dataset name used in the statistics row
    #[arg(long, default_value = "corpus")]
    dataset: String,
    /// Tokens of left and right context
    #[arg(long)]
    n: Option<usize>,
    /// Mentions of left and right context
    #[arg(long)]
    k: Option<usize>,
}

fn extract(a: ExtractArgs, s: &Settings) -> Result<Outcome> {
    let n = a.n.unwrap_or(s.model.n);
    let k = a.k.unwrap_or(s.model.k);
    let files = inputs::collect(&a.inputs)?;
    let res = resources(s)?;
    let mut conll = Vec::new();
    let mut benchmark = Vec::new();
    for f in &files {
        match inputs::kind_of(f) {
            Some(Kind::Json) => benchmark.push(inputs::load_benchmark(f)?),
            _ => conll.extend(inputs::load_conll(f)?),
        }
    }
    let read = conll.len();
    let conll = filter_deictic_documents(conll);
    if read > 0 {
        info!("{} of {read} CoNLL documents have no deictic narration", conll.len());
    }
    if conll.is_empty() && benchmark.is_empty() {
        warn!("no documents left after filtering; writing an empty example file");
    }
    let mut examples = extract_corpus(&conll, n, k);
    for pov in &benchmark {
        let (spec, from_pov) = focus_of(pov, &FocusArgs::default())?;
        let plan = plan_conversion(&pov.doc, &spec, from_pov, &res)?;
        examples.extend(gold_ranking_examples(pov, &plan, n, k));
    }
    inputs::write(&a.out, inputs::examples_jsonl(&examples))?;
    if let Some(p) = &a.stats {
        let mut docs: Vec<Document> = conll;
        docs.extend(benchmark.into_iter().map(|b| b.doc));
        inputs::write(p, stats_csv(&[(a.dataset.clone(), corpus_stats(&docs))]))?;
    }
    out(&format!("{} examples written to {}\n", examples.len(), a.out.display()))?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- train

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Ranking examples from extract-data
    #[arg(long, value_name = "PATH")]
    examples: PathBuf,
    /// Development examples for early stopping (defaults to the training examples)
    #[arg(long, value_name = "PATH")]
    dev: Option<PathBuf>,
    /// Where to write the model
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Train a tree baseline instead of the neural ranker
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    /// Maximum training epochs
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Exit with status 1 when development accuracy ends below this value
    #[arg(long, value_name = "ACC")]
    min_accuracy: Option<f64>,
}

fn cmd_train(a: TrainArgs, s: &Settings) -> Result<Outcome> {
    let examples = inputs::read_examples(&a.examples)?;
    let dev = match &a.dev {
        Some(p) => inputs::read_examples(p)?,
        None => Vec::new(),
    };
    let provider = provider(s)?;
    let eval_set = if dev.is_empty() { &examples } else { &dev };
    let (bytes, acc) = match a.baseline.map(to_baseline) {
        None => {
            let mut cfg = s.model.clone();
            if let Some(e) = a.max_epochs {
                cfg.max_epochs = e;
            }
            cfg.validate()?;
            let ranker = train(&examples, &cfg, &provider, &dev)?;
            let acc = accuracy(&ranker, eval_set, &provider)?;
            (ranker.to_bytes()?, acc)
        }
        Some(b) => {
            let variant = b.tree_variant().ok_or_else(|| {
                Error::Argument(format!("baseline {} needs no training; use tree, forest or gbt", b.name()))
            })?;
            let model = train_tree_ranker(&examples, variant, &TreeConfig::for_variant(variant, s.seed), &provider)?;
            let acc = model.accuracy(eval_set, &provider)?;
            (model.to_bytes()?, acc)
        }
    };
    inputs::write(&a.out, bytes)?;
    provider.flush()?;
    let which = if dev.is_empty() { "training" } else { "development" };
    out(&format!("{which} accuracy {acc:.4}; model written to {}\n", a.out.display()))?;
    match a.min_accuracy {
        Some(min) if acc < min => Ok(Outcome::GateFailed(format!("{which} accuracy {acc:.4} is below {min}"))),
        _ => Ok(Outcome::Ok),
    }
}

fn to_baseline(b: BaselineArg) -> Baseline {
    match b {
        BaselineArg::Random => Baseline::Random,
        BaselineArg::Pronouns => Baseline::Pronouns,
        BaselineArg::MostCommon => Baseline::MostCommon,
        BaselineArg::Tree => Baseline::Tree,
        BaselineArg::Forest => Baseline::Forest,
        BaselineArg::Gbt => Baseline::Gbt,
    }
}

// ---------------------------------------------------------------- systems

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenderArg {
    Feminine,
    Masculine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PovArg {
    First,
    Second,
}

/// Focus entity flags; each overrides the document's own focus description.
#[derive(Args, Debug, Default)]
pub struct FocusArgs {
    /// Narration the focus entity is converted from
    #[arg(long, value_enum)]
    from_pov: Option<PovArg>,
    /// Gender of the focus entity
    #[arg(long, value_enum)]
    focus_gender: Option<GenderArg>,
    /// Name of the focus entity, e.g. "Nick Flynn"
    #[arg(long, value_name = "NAME")]
    focus_name: Option<String>,
}

fn focus_of(pov: &PovDocument, f: &FocusArgs) -> Result<(EntitySpec, Pov)> {
    let base = pov.focus_spec();
    let gender = match f.focus_gender {
        Some(GenderArg::Feminine) => Gender::Feminine,
        Some(GenderArg::Masculine) => Gender::Masculine,
        None => base.as_ref().map(|b| b.0.gender).ok_or_else(|| {
            Error::Argument(format!("{}: no focus gender; pass --focus-gender", pov.doc.doc_id))
        })?,
    };
    let from_pov = match f.from_pov {
        Some(PovArg::First) => Pov::First,
        Some(PovArg::Second) => Pov::Second,
        None => base
            .as_ref()
            .map(|b| b.1)
            .ok_or_else(|| Error::Argument(format!("{}: no source narration; pass --from-pov", pov.doc.doc_id)))?,
    };
    let mut spec = match (&f.focus_name, base) {
        (Some(name), _) => EntitySpec::focus(gender).with_name(name),
        (None, Some((b, _))) => EntitySpec { gender, ..b },
        (None, None) => EntitySpec::focus(gender),
    };
    spec.gender = gender;
    spec.validate().map_err(Error::Argument)?;
    Ok((spec, from_pov))
}

#[derive(Args, Debug)]
pub struct SystemArgs {
    /// Trained ranker or tree model
    #[arg(long, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Use a baseline; tree, forest and gbt also need --model
    #[arg(long, value_enum)]
    baseline: Option<BaselineArg>,
    /// Load a model whose embedding provider version differs from the current one
    #[arg(long)]
    force: bool,
}

enum System {
    Ranker(Ranker),
    Tree(TreeModel),
    Random(u64),
    Pronouns,
    MostCommon,
}

impl System {
    fn load(a: &SystemArgs, s: &Settings, provider: &dyn EmbeddingProvider) -> Result<Self> {
        let model = match &a.model {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| inputs::io_error(p, e))?;
                let c = Container::from_bytes(&bytes, Some(provider.version()), a.force)?;
                Some(match c.kind {
                    ModelKind::Ranker => System::Ranker(Ranker::from_container(c)?),
                    ModelKind::Tree => System::Tree(TreeModel::from_container(c)?),
                })
            }
            None => None,
        };
        match (a.baseline.map(to_baseline), model) {
            (None, Some(m @ System::Ranker(_))) | (None, Some(m @ System::Tree(_))) => Ok(m),
            (None, _) => Err(Error::Argument("pass --model or --baseline".into())),
            (Some(b), m) => match b {
                Baseline::Random => Ok(System::Random(s.seed)),
                Baseline::Pronouns => Ok(System::Pronouns),
                Baseline::MostCommon => Ok(System::MostCommon),
                _ => match m {
                    Some(System::Tree(t)) if Some(t.variant) == b.tree_variant() => Ok(System::Tree(t)),
                    Some(System::Tree(t)) => Err(Error::Argument(format!(
                        "--baseline {} given but the model holds a {:?}",
                        b.name(),
                        t.variant
                    ))),
                    _ => Err(Error::Argument(format!("--baseline {} needs a tree model via --model", b.name()))),
                },
            },
        }
    }

    fn context(&self, s: &Settings) -> (usize, usize) {
        match self {
            System::Ranker(r) => (r.config().n, r.config().k),
            _ => (s.model.n, s.model.k),
        }
    }

    fn selector<'a>(&'a self, pov: &PovDocument, provider: &'a dyn EmbeddingProvider) -> Result<Box<dyn MentionSelector + 'a>> {
        Ok(match self {
            System::Ranker(ranker) => Box::new(RankerSelector { ranker, provider }),
            System::Tree(model) => Box::new(TreeSelector { model, provider }),
            System::Random(seed) => Box::new(RandomSelector::new(*seed)),
            System::Pronouns => Box::new(PronounSelector),
            System::MostCommon => {
                let mut by_chain: HashMap<ChainId, Vec<String>> = HashMap::new();
                for r in &pov.gold.replacements {
                    by_chain.entry(r.chain_id.clone()).or_default().push(r.string.clone());
                }
                if by_chain.is_empty() {
                    return Err(Error::Argument(format!(
                        "{}: the most-common baseline needs gold replacements",
                        pov.doc.doc_id
                    )));
                }
                Box::new(MostCommonSelector::new(&by_chain)?)
            }
        })
    }
}

// ---------------------------------------------------------------- convert

#[derive(Args, Debug)]
pub struct ConvertArgs {
    /// Documents to convert: JSON documents, or plain text with --gold-annotations
    #[arg(required = true, value_name = "INPUT")]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    focus: FocusArgs,
    #[command(flatten)]
    system: SystemArgs,
    /// Annotate plain-text input from this JSON document instead of reading JSON input
    #[arg(long, value_name = "PATH")]
    gold_annotations: Option<PathBuf>,
    /// Write <doc_id>.json and <doc_id>.txt for every input here
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Print the edit list as JSON instead of the converted text
    #[arg(long)]
    json: bool,
}

fn load_inputs(paths: &[PathBuf], gold: Option<&Path>, res: &Resources) -> Result<Vec<PovDocument>> {
    let Some(gold) = gold else {
        return paths.iter().map(|p| inputs::load_benchmark(p)).collect();
    };
    let record: DocumentRecord = serde_json::from_str(&inputs::read(gold)?)
        .map_err(|e| Error::Parse { line: e.line(), message: format!("{}: {e}", gold.display()) })?;
    let adapter = GoldAdapter::new(record.clone());
    paths
        .iter()
        .map(|p| {
            let text = inputs::read(p)?;
            let doc = annotate(&record.doc_id, &text, &AnnotationAdapters::uniform(&adapter), &res.performatives)?;
            Ok(PovDocument {
                doc,
                focus: record.focus.clone(),
                gold: GoldEdits {
                    replacements: record.gold_replacements.clone(),
                    verb_changes: record.gold_verb_changes.clone(),
                },
            })
        })
        .collect()
}

fn cmd_convert(a: ConvertArgs, s: &Settings) -> Result<Outcome> {
    let res = resources(s)?;
    let provider = provider(s)?;
    let system = System::load(&a.system, s, &provider)?;
    let (n, k) = system.context(s);
    let docs = load_inputs(&a.inputs, a.gold_annotations.as_deref(), &res)?;
    let results = pool_map(&docs, |pov| {
        let (spec, from_pov) = focus_of(pov, &a.focus)?;
        let mut selector = system.selector(pov, &provider)?;
        let (_, result, _) = convert(&pov.doc, &spec, from_pov, &res, selector.as_mut(), n, k)?;
        Ok(result)
    })?;
    provider.flush()?;
    match &a.out_dir {
        Some(dir) => {
            for r in &results {
                let stem = r.doc_id.replace(['/', '\\'], "_");
                inputs::write(&dir.join(format!("{stem}.json")), r.to_json() + "\n")?;
                inputs::write(&dir.join(format!("{stem}.txt")), r.text.clone() + "\n")?;
            }
        }
        None => {
            for r in &results {
                if a.json {
                    out(&format!("{}\n", r.to_json()))?;
                } else {
                    out(&format!("{}\n", r.text))?;
                }
            }
        }
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- evaluate

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Benchmark documents with gold edits (files or directories)
    #[arg(long, required = true, value_name = "PATH")]
    gold: Vec<PathBuf>,
    /// Conversion results to score (files or directories); without it the system
    /// given by --model or --baseline is run on the gold documents
    #[arg(long, value_name = "PATH")]
    pred: Vec<PathBuf>,
    #[command(flatten)]
    system: SystemArgs,
    /// Also score each pipeline stage with gold input (system runs only)
    #[arg(long)]
    components: bool,
    /// Write the full report as JSON
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,
    /// Exit with status 1 when overall F1 is below this value
    #[arg(long, value_name = "F1")]
    min_f1: Option<f64>,
}

#[derive(Serialize)]
struct EvaluationReport {
    scores: ScoreReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    mention_selection_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    components: Vec<StageReport>,
}

#[derive(Serialize)]
struct StageReport {
    stage: &'static str,
    report: ScoreReport,
}

/// Reads a conversion result, or a benchmark document standing for its gold conversion.
fn load_prediction(path: &Path) -> Result<ConversionResult> {
    let text = inputs::read(path)?;
    match ConversionResult::from_json(&text) {
        Ok(r) => Ok(r),
        Err(_) => inputs::load_benchmark(path).map(|d| gold_result(&d)),
    }
}

fn evaluate(a: EvaluateArgs, s: &Settings) -> Result<Outcome> {
    let gold_docs = inputs::benchmark_docs(&a.gold)?;
    if gold_docs.is_empty() {
        return Err(Error::Argument("no gold documents found".into()));
    }
    let mut report = if !a.pred.is_empty() {
        let mut preds: HashMap<String, ConversionResult> = HashMap::new();
        for p in inputs::collect(&a.pred)? {
            let r = load_prediction(&p)?;
            preds.insert(r.doc_id.clone(), r);
        }
        let mut reports = Vec::new();
        for g in &gold_docs {
            let pred = preds.get(&g.doc.doc_id).ok_or_else(|| {
                Error::Argument(format!("no prediction for document {}", g.doc.doc_id))
            })?;
            reports.push(score_conversion(pred, &gold_result(g))?);
        }
        EvaluationReport { scores: ScoreReport::combine(&reports), mention_selection_accuracy: None, components: vec![] }
    } else {
        let res = resources(s)?;
        let provider = provider(s)?;
        let system = System::load(&a.system, s, &provider)?;
        let (n, k) = system.context(s);
        let per_doc = pool_map(&gold_docs, |pov| {
            let mut selector = system.selector(pov, &provider)?;
            let e = evaluate_document(pov, &res, selector.as_mut(), n, k)?;
            let stages = if a.components {
                let mut selector = system.selector(pov, &provider)?;
                let (pred, gold) = pipeline_trace(pov, None, &res, selector.as_mut(), n, k)?;
                component_scores(&pred, &gold)
            } else {
                Vec::new()
            };
            Ok((e, stages))
        })?;
        provider.flush()?;
        let slots: usize = per_doc.iter().map(|(e, _)| e.slots).sum();
        let correct: f64 = per_doc.iter().map(|(e, _)| e.accuracy * e.slots as f64).sum();
        let mut by_stage: Vec<(&'static str, Vec<ScoreReport>)> = Vec::new();
        for (_, stages) in &per_doc {
            for Stage { name, report } in stages {
                match by_stage.iter_mut().find(|(n, _)| n == name) {
                    Some((_, v)) => v.push(report.clone()),
                    None => by_stage.push((name, vec![report.clone()])),
                }
            }
        }
        EvaluationReport {
            scores: ScoreReport::combine(&per_doc.iter().map(|(e, _)| e.report.clone()).collect::<Vec<_>>()),
            mention_selection_accuracy: Some(if slots == 0 { 0.0 } else { correct / slots as f64 }),
            components: by_stage
                .into_iter()
                .map(|(stage, rs)| StageReport { stage, report: ScoreReport::combine(&rs) })
                .collect(),
        }
    };
    out(&report.scores.to_csv())?;
    if let Some(acc) = report.mention_selection_accuracy {
        out(&format!("mention_selection_accuracy,{acc:.4}\n"))?;
    }
    for c in &report.components {
        out(&format!("stage,{},{:.4},{:.4},{:.4}\n", c.stage, c.report.precision, c.report.recall, c.report.f1))?;
    }
    if let Some(p) = &a.report {
        for c in &mut report.components {
            c.report.per_document.clear();
        }
        inputs::write(p, serde_json::to_string_pretty(&report).expect("reports serialize") + "\n")?;
    }
    match a.min_f1 {
        Some(min) if report.scores.f1 < min => {
            Ok(Outcome::GateFailed(format!("F1 {:.4} is below {min}", report.scores.f1)))
        }
        _ => Ok(Outcome::Ok),
    }
}

// ---------------------------------------------------------------- score-human-eval

#[derive(Args, Debug)]
pub struct HumanArgs {
    /// Ratings CSV with header worker,sentence,mention,amb,correct,nat
    #[arg(value_name = "RATINGS")]
    ratings: PathBuf,
    /// Write per-sentence referential and naturalness scores as CSV
    #[arg(long, value_name = "PATH")]
    scatter: Option<PathBuf>,
}

fn human(a: HumanArgs) -> Result<Outcome> {
    let ratings = parse_ratings(&inputs::read(&a.ratings)?).map_err(|e| at(&a.ratings, e))?;
    let report = score_ratings(&ratings)?;
    if let Some(p) = &a.scatter {
        inputs::write(p, report.scatter_csv())?;
    }
    out(&format!("{}\n", serde_json::to_string_pretty(&report).expect("reports serialize")))?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- ablate

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Training examples from extract-data
    #[arg(long, value_name = "PATH")]
    examples: PathBuf,
    /// Development examples for early stopping
    #[arg(long, value_name = "PATH")]
    dev: Option<PathBuf>,
    /// Benchmark documents to evaluate on (files or directories)
    #[arg(long = "eval", required = true, value_name = "PATH")]
    eval_docs: Vec<PathBuf>,
    /// Comma-separated model variants: full, token, mention, no-mention-features,
    /// no-candidate-features, or `+`-joined parts token+mention+phi_t+phi_b
    #[arg(long, value_delimiter = ',', default_value = "full,token")]
    variants: Vec<String>,
    /// Comma-separated training seeds (defaults to --seed)
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Maximum training epochs
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Directory for ablation.csv, ttests.csv and ablation.json
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

fn parse_variant(name: &str) -> Result<FeatureSet> {
    let off = FeatureSet { token_lstm: false, mention_lstm: false, mention_features: false, candidate_features: false };
    let full = FeatureSet::default();
    Ok(match name {
        "full" => full,
        "token" => FeatureSet { token_lstm: true, ..off },
        "mention" => FeatureSet { mention_lstm: true, mention_features: true, ..off },
        "no-mention-features" => FeatureSet { mention_features: false, ..full },
        "no-candidate-features" => FeatureSet { candidate_features: false, ..full },
        _ => {
            let mut f = off;
            for part in name.split('+') {
                match part {
                    "token" => f.token_lstm = true,
                    "mention" => f.mention_lstm = true,
                    "phi_t" => f.mention_features = true,
                    "phi_b" => f.candidate_features = true,
                    _ => return Err(Error::Argument(format!("unknown model variant {name:?}"))),
                }
            }
            f
        }
    })
}

fn ablate(a: AblateArgs, s: &Settings) -> Result<Outcome> {
    let variants: Vec<FeatureSet> = a.variants.iter().map(|v| parse_variant(v)).collect::<Result<_>>()?;
    let seeds = if a.seeds.is_empty() { vec![s.seed] } else { a.seeds.clone() };
    let examples = inputs::read_examples(&a.examples)?;
    let dev: Vec<RankingExample> = match &a.dev {
        Some(p) => inputs::read_examples(p)?,
        None => Vec::new(),
    };
    let docs = inputs::benchmark_docs(&a.eval_docs)?;
    let mut cfg = s.model.clone();
    if let Some(e) = a.max_epochs {
        cfg.max_epochs = e;
    }
    let provider = provider(s)?;
    let res = resources(s)?;
    let report = ablation_run(&variants, &seeds, &cfg, &examples, &dev, &docs, &provider, &res)?;
    provider.flush()?;
    let csv = report.to_csv();
    inputs::write(&a.out_dir.join("ablation.csv"), &csv)?;
    inputs::write(&a.out_dir.join("ttests.csv"), report.tests_csv())?;
    inputs::write(
        &a.out_dir.join("ablation.json"),
        serde_json::to_string_pretty(&report).expect("reports serialize") + "\n",
    )?;
    out(&csv)?;
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------- stats

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// One dataset per argument: a CoNLL file, a JSON document, or a directory
    #[arg(required = true, value_name = "DATASET")]
    datasets: Vec<PathBuf>,
    /// Keep CoNLL documents with first or second person narration
    #[arg(long)]
    no_filter: bool,
}

fn stats(a: StatsArgs) -> Result<Outcome> {
    let mut rows = Vec::new();
    for d in &a.datasets {
        let mut conll = Vec::new();
        let mut docs = Vec::new();
        for f in inputs::collect(std::slice::from_ref(d))? {
            match inputs::kind_of(&f) {
                Some(Kind::Json) => docs.push(inputs::load_benchmark(&f)?.doc),
                _ => conll.extend(inputs::load_conll(&f)?),
            }
        }
        if !a.no_filter {
            conll = filter_deictic_documents(conll);
        }
        docs.extend(conll);
        let name = d
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| d.display().to_string());
        rows.push((name, corpus_stats(&docs)));
    }
    out(&stats_csv(&rows))?;
    Ok(Outcome::Ok)
}
