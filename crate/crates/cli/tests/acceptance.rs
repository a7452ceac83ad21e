//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the libtest
//! harness so the lines always reach the terminal.
//!
//! Set POVSHIFT_CONLL_TRAIN to a directory of CoNLL-2012 `*gold_conll` training
//! files to also check the licensed corpus counts.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use povshift::baselines::{only_pronouns_select, random_select, train_tree_ranker, TreeConfig, TreeVariant};
use povshift::candidates::{Candidate, CandidateSource};
use povshift::eval::human::{aggregate_scores, parse_ratings, referential_percent, referential_score};
use povshift::eval::{mention_selection_accuracy, paired_t_test, score_conversion};
use povshift::format::GoldReplacement;
use povshift::ingest::{extract_ranking_examples, load_conll_document, load_pov_document, RankingExample};
use povshift::morph::{conjugate_third_singular, Tense};
use povshift::pipeline::{gold_ranking_examples, plan_conversion, ConversionResult, MentionEditRecord, Resources};
use povshift::ranker::{accuracy, ranking_loss, train, FeatureSet, HashEmbedding, ModelConfig, Ranker};
use povshift::synth::{generate_corpus, SynthConfig};
use povshift::{ChainId, TokenSpan};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn example(name: &str) -> String {
    root().join("data/examples").join(name).to_str().unwrap().to_owned()
}

fn cli(args: &[&str]) -> Result<(Vec<u8>, Duration), String> {
    let t = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_povshift"))
        .env_remove("POVSHIFT_CACHE")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = t.elapsed();
    if !out.status.success() {
        return Err(format!("povshift {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok((out.stdout, elapsed))
}

fn text(bytes: Vec<u8>) -> String {
    String::from_utf8(bytes).unwrap()
}

fn synthetic(seed: u64, docs: usize) -> Vec<RankingExample> {
    let res = Resources::builtin();
    let corpus = generate_corpus(&SynthConfig { num_docs: docs, seed, ..Default::default() }).unwrap();
    let mut out = Vec::new();
    for d in &corpus {
        let (spec, pov) = d.focus_spec().unwrap();
        let plan = plan_conversion(&d.doc, &spec, pov, &res).unwrap();
        out.extend(gold_ranking_examples(d, &plan, 50, 10));
    }
    out
}

fn narrowed(ex: &RankingExample) -> Vec<String> {
    ex.narrowed().iter().map(|i| ex.candidate_set[*i].clone()).collect()
}

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn pipeline_fidelity(dir: &Path) -> Outcome {
    let nick = example("nick.json");
    let pov = load_pov_document(&std::fs::read_to_string(&nick).unwrap()).map_err(|e| e.to_string())?;
    let (spec, from) = pov.focus_spec().ok_or("nick.json has no focus")?;
    let plan = plan_conversion(&pov.doc, &spec, from, &Resources::builtin()).map_err(|e| e.to_string())?;
    let phil = pov.doc.chains.iter().find(|c| c.mentions[0].string == "Phil").ok_or("no Phil chain")?;
    ensure(plan.confounders.singular == [phil.chain_id.clone()] && plan.confounders.plural.is_empty(), "confounders")?;
    let strings = |id: &ChainId| -> BTreeSet<String> {
        plan.entity(id).map(|e| e.candidates.iter().map(|c| c.string.clone()).collect()).unwrap_or_default()
    };
    ensure(strings(&phil.chain_id) == set(&["Phil", "his"]), format!("S(E_1) = {:?}", strings(&phil.chain_id)))?;
    let nick_set = set(&[
        "Nick Flynn", "Nick", "Flynn", "Nick Flynn's", "Nick's", "Flynn's", "he", "him", "his", "himself",
        "he himself", "his son", "her son", "his brother", "his grandson",
    ]);
    ensure(strings(&plan.focus) == nick_set, format!("S(E_2) = {:?}", strings(&plan.focus)))?;
    let verbs: Vec<(&str, &str)> =
        plan.verb_edits.iter().filter(|v| v.changes()).map(|v| (v.original_form.as_str(), v.new_form.as_str())).collect();
    ensure(verbs == [("drive", "drives")], format!("verb edits {verbs:?}"))?;

    // ranker fitted to the document, then run on the raw text with its annotations
    let ex = dir.join("nick.jsonl");
    let model = dir.join("nick.model");
    let cfg = dir.join("fit.toml");
    std::fs::write(&cfg, "[model]\nstop_at_dev_accuracy = 1.0\nmax_epochs = 200\n").unwrap();
    let raw = dir.join("nick.txt");
    std::fs::write(&raw, &pov.doc.source_text).unwrap();
    cli(&["extract-data", &nick, "--out", ex.to_str().unwrap()])?;
    cli(&["--config", cfg.to_str().unwrap(), "train", "--examples", ex.to_str().unwrap(), "--out", model.to_str().unwrap()])?;
    let args = ["convert", raw.to_str().unwrap(), "--gold-annotations", &nick, "--model", model.to_str().unwrap()];
    let (out, elapsed) = cli(&args)?;
    let expected = "Nick Flynn's father and his mother raised him with his brother and his grandfather. \
                    Phil returns to Boston, to his job. Nick drives to the city every other week, to work a night \
                    or two at Pine Street, to see Emily.\n";
    ensure(text(out.clone()) == expected, format!("converted text {:?}", text(out)))?;
    let (json, _) = cli(&[&args[..], &["--json"]].concat())?;
    let result = ConversionResult::from_json(&text(json)).map_err(|e| e.to_string())?;
    ensure(result.mention_edits.iter().all(|e| e.chain_id == plan.focus), "a non-focus mention was edited")?;
    ensure(elapsed < Duration::from_secs(5), format!("convert took {elapsed:?}"))?;
    Ok(format!("exact text, confounders and candidate sets; convert in {:.2}s", elapsed.as_secs_f64()))
}

fn conjugation() -> Outcome {
    let table = std::fs::read_to_string(root().join("crates/core/tests/data/conjugation.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().filter(|l| !l.starts_with('#')).map(|l| l.split('\t').collect()).collect();
    ensure(rows.len() == 60, format!("{} rows", rows.len()))?;
    let mut wrong = Vec::new();
    for r in &rows {
        let tense = if r[2] == "past" { Tense::Past } else { Tense::Present };
        let got = conjugate_third_singular(r[0], r[1], tense).map_err(|e| e.to_string())?;
        if got != r[3] {
            wrong.push(format!("{} -> {got}", r[0]));
        }
    }
    ensure(wrong.is_empty(), format!("wrong: {wrong:?}"))?;
    Ok("60/60 exact".into())
}

fn loss_and_scorer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let gold = rng.gen_range(-5.0..5.0);
        let margin = rng.gen_range(0.01..2.0);
        let mut others: Vec<f64> = (0..rng.gen_range(1..8)).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let loss = ranking_loss(gold, &others, margin);
        ensure(loss >= 0.0, "negative loss")?;
        ensure((loss == 0.0) == others.iter().all(|s| gold - s >= margin), "zero-iff-margin violated")?;
        others.shuffle(&mut rng);
        ensure((ranking_loss(gold, &others, margin) - loss).abs() <= 1e-12 * (1.0 + loss), "order changed the loss")?;
    }

    let p = HashEmbedding::new(4);
    let exs: Vec<RankingExample> = {
        let res = Resources::builtin();
        let corpus = generate_corpus(&SynthConfig { num_docs: 3, seed: 21, ..Default::default() }).unwrap();
        corpus
            .iter()
            .flat_map(|d| {
                let (spec, pov) = d.focus_spec().unwrap();
                let plan = plan_conversion(&d.doc, &spec, pov, &res).unwrap();
                gold_ranking_examples(d, &plan, 3, 2)
            })
            .filter(|e| e.has_pairs())
            .collect()
    };
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let ex = &exs[rng.gen_range(0..exs.len())];
        let mut cands = ex.candidate_set.clone();
        cands.truncate(rng.gen_range(2..=4).min(cands.len()));
        let gold = rng.gen_range(0..cands.len());
        let config = ModelConfig { n: 3, k: 2, lstm_hidden: 3, mlp_hidden: 4, margin: 0.5, seed: draw, ..Default::default() };
        let mut r = Ranker::new(config, &p).map_err(|e| e.to_string())?;
        let v = r.output_weights_range();
        r.params_mut()[v].iter_mut().for_each(|x| *x *= 0.1);
        let (_, grad) = r.loss_gradient(&ex.context, &cands, gold, &p).map_err(|e| e.to_string())?;
        let (mut diff, mut na, mut nb) = (0.0, 0.0, 0.0);
        for i in 0..grad.len() {
            let orig = r.params()[i];
            r.params_mut()[i] = orig + h;
            let up = r.loss_gradient(&ex.context, &cands, gold, &p).unwrap().0;
            r.params_mut()[i] = orig - h;
            let down = r.loss_gradient(&ex.context, &cands, gold, &p).unwrap().0;
            r.params_mut()[i] = orig;
            let num = (up - down) / (2.0 * h);
            diff += (num - grad[i]).powi(2);
            na += num * num;
            nb += grad[i] * grad[i];
        }
        let scale = f64::max(na, nb).sqrt();
        if scale > 0.0 {
            worst = worst.max(diff.sqrt() / scale);
        }
    }
    ensure(worst <= 1e-4, format!("gradient relative error {worst:e}"))?;

    let mut r = Ranker::new(ModelConfig::default(), &HashEmbedding::default()).map_err(|e| e.to_string())?;
    let v = r.output_weights_range();
    r.params_mut()[v].iter_mut().for_each(|x| *x = 0.0);
    let big = synthetic(21, 2);
    for ex in big.iter().take(10) {
        for c in &ex.candidate_set {
            ensure(r.score(c, &ex.context, &HashEmbedding::default()).unwrap() == 0.0, "v_s = 0 gave a non-zero score")?;
        }
    }
    Ok(format!("1000 loss cases; worst gradient relative error {worst:.1e} over 100 draws; v_s = 0 scores 0"))
}

struct Corpus {
    train: Vec<RankingExample>,
    dev: Vec<RankingExample>,
    test: Vec<RankingExample>,
}

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

fn held_out_config(seed: u64, features: FeatureSet) -> ModelConfig {
    ModelConfig { max_epochs: 30, patience: 5, seed, features, ..Default::default() }
}

fn capacity(c: &Corpus, p: &HashEmbedding, full_acc: &mut Vec<f64>) -> Outcome {
    let t = Instant::now();
    let config = ModelConfig { stop_at_dev_accuracy: Some(0.95), max_epochs: 200, ..Default::default() };
    let r = train(&c.train, &config, p, &[]).map_err(|e| e.to_string())?;
    let train_time = t.elapsed();
    let train_acc = accuracy(&r, &c.train, p).map_err(|e| e.to_string())?;
    ensure(train_acc >= 0.95, format!("training accuracy {train_acc:.4}"))?;
    ensure(r.metadata.epochs_run <= 200 && train_time < Duration::from_secs(300), format!("took {train_time:?}"))?;

    let token_only = FeatureSet { token_lstm: true, mention_lstm: false, mention_features: false, candidate_features: false };
    let mut token_acc = Vec::new();
    for seed in SEEDS {
        let full = train(&c.train, &held_out_config(seed, FeatureSet::default()), p, &c.dev).map_err(|e| e.to_string())?;
        full_acc.push(accuracy(&full, &c.test, p).map_err(|e| e.to_string())?);
        let token = train(&c.train, &held_out_config(seed, token_only), p, &c.dev).map_err(|e| e.to_string())?;
        token_acc.push(accuracy(&token, &c.test, p).map_err(|e| e.to_string())?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let pval = paired_t_test(full_acc, &token_acc).map_err(|e| e.to_string())?;
    let detail = format!(
        "train accuracy {train_acc:.4} after {} epochs in {:.0}s; held-out full {:.4} vs token-only {:.4}, p = {pval:.4}",
        r.metadata.epochs_run,
        train_time.as_secs_f64(),
        mean(full_acc),
        mean(&token_acc)
    );
    ensure(mean(full_acc) > mean(&token_acc) && pval < 0.05, detail.clone())?;
    Ok(detail)
}

fn baseline_ordering(c: &Corpus, p: &HashEmbedding, full_acc: &[f64]) -> Outcome {
    ensure(!full_acc.is_empty(), "no ranker accuracies (capacity check failed early)")?;
    let ranker = full_acc.iter().sum::<f64>() / full_acc.len() as f64;
    let mut trees = Vec::new();
    for v in [TreeVariant::SingleTree, TreeVariant::RandomForest, TreeVariant::GradientBoosted] {
        let m = train_tree_ranker(&c.train, v, &TreeConfig::for_variant(v, 1), p).map_err(|e| e.to_string())?;
        trees.push((v, m.accuracy(&c.test, p).map_err(|e| e.to_string())?));
    }

    let sets: Vec<Vec<String>> = c.test.iter().map(narrowed).collect();
    let probs: Vec<f64> = sets
        .iter()
        .zip(&c.test)
        .map(|(s, e)| if s.contains(&e.gold_string) { 1.0 / s.len() as f64 } else { 0.0 })
        .collect();
    let n = probs.len() as f64;
    let expected = probs.iter().sum::<f64>() / n;
    let sigma = probs.iter().map(|p| p * (1.0 - p)).sum::<f64>().sqrt() / n;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let hits = sets.iter().zip(&c.test).filter(|(s, e)| random_select(s, &mut rng).unwrap() == e.gold_string).count();
    let random = hits as f64 / n;
    ensure((random - expected).abs() <= 3.0 * sigma, format!("random {random:.4} vs expectation {expected:.4} (sigma {sigma:.4})"))?;

    let pron_hits = sets
        .iter()
        .zip(&c.test)
        .filter(|(s, e)| {
            let cands: Vec<Candidate> = s.iter().map(|x| Candidate::new(x.as_str(), CandidateSource::ChainString)).collect();
            only_pronouns_select(&cands, e.context.case, e.context.gender, e.context.number).unwrap().0 == e.gold_string
        })
        .count();
    let pronouns = pron_hits as f64 / n;

    let detail = format!(
        "ranker {ranker:.4} > {} > random {random:.4} (expected {expected:.4}), pronouns {pronouns:.4}",
        trees.iter().map(|(v, a)| format!("{v:?} {a:.4}")).collect::<Vec<_>>().join(", ")
    );
    let floor = random.max(pronouns).max(expected);
    ensure(trees.iter().all(|(_, a)| *a < ranker && *a > floor), detail.clone())?;
    Ok(detail)
}

fn metrics() -> Outcome {
    let edit = |i: usize, s: &str| MentionEditRecord {
        char_start: i * 10,
        char_end: i * 10 + 1,
        old: "x".into(),
        new: s.into(),
        chain_id: ChainId::new("1"),
    };
    let result = |edits: Vec<MentionEditRecord>| ConversionResult {
        doc_id: "d".into(),
        text: String::new(),
        mention_edits: edits,
        verb_edits: vec![],
    };
    let gold = result((0..14).map(|i| edit(i, "he")).collect());
    let pred = result((0..10).map(|i| edit(i, if i < 7 { "he" } else { "him" })).collect());
    let r = score_conversion(&pred, &gold).map_err(|e| e.to_string())?;
    ensure((r.precision, r.recall) == (0.7, 0.5) && (r.f1 - 0.7 / 1.2).abs() < 1e-12, format!("P/R/F1 {r:?}"))?;
    let same = score_conversion(&gold, &gold).unwrap();
    ensure((same.precision, same.recall, same.f1) == (1.0, 1.0, 1.0), "identity")?;
    let none = score_conversion(&result(vec![]), &gold).unwrap();
    ensure((none.precision, none.recall, none.f1) == (0.0, 0.0, 0.0), "no predictions")?;

    let slot = |i: usize, s: &str| GoldReplacement { chain_id: ChainId::new("1"), span: TokenSpan::new(i, i), string: s.into() };
    let g = [slot(0, "Nick"), slot(1, "he"), slot(2, "his"), slot(3, "him")];
    let pr = [slot(0, "Nick"), slot(1, "he"), slot(2, "his"), slot(3, "Nick")];
    ensure(mention_selection_accuracy(&pr, &g) == 0.75, "3 of 4")?;
    ensure(mention_selection_accuracy(&[slot(0, "nick")], &[slot(0, "Nick")]) == 0.0, "case-sensitive match")?;

    let ratings = parse_ratings(
        "worker,sentence,mention,amb,correct,nat\nw,a,1,2,1,2\nw,a,2,2,1,2\nw,b,1,impossible,,0\nw,c,1,1,1,1\nw,c,2,2,0,1\n",
    )
    .map_err(|e| e.to_string())?;
    let refs =
        [referential_score(&ratings[..2]), referential_score(&ratings[2..3]), referential_score(&ratings[3..])];
    ensure(refs.iter().map(|r| *r.as_ref().unwrap()).eq([2.0, -2.0, -0.5]), format!("referential {refs:?}"))?;
    ensure(aggregate_scores(&[(2.0, 2.0); 5]).unwrap().0 == 2.0, "aggregate of 2s")?;
    ensure(aggregate_scores(&[(1.0, 0.0), (-1.0, 0.0)]).unwrap().0 == 0.0, "aggregate of 1, -1")?;
    ensure((referential_percent(1.24) - 81.0).abs() < 5e-5, "1.24 -> 81%")?;

    let a = [0.72, 0.75, 0.71, 0.74];
    let b = [0.70, 0.71, 0.70, 0.72];
    ensure(paired_t_test(&a, &a).unwrap() == 1.0, "a = b")?;
    let shifted: Vec<f64> = b.iter().map(|x| x + 0.05).collect();
    ensure(paired_t_test(&shifted, &b).unwrap() < 1e-12, "a = b + 0.05")?;
    let pv = paired_t_test(&a, &b).unwrap();
    let oracle = t_sf_oracle(&a, &b);
    ensure((pv - oracle).abs() < 1e-6, format!("t-test {pv} vs oracle {oracle}"))?;
    Ok(format!("all worked examples exact; t-test p {pv:.6} vs oracle {oracle:.6}"))
}

/// One-tailed paired t p-value by Simpson integration of the t density.
fn t_sf_oracle(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t = mean / (sd / n.sqrt());
    let df = n - 1.0;
    fn gamma(x: f64) -> f64 {
        if (x - 1.0).abs() < 1e-12 {
            1.0
        } else if (x - 0.5).abs() < 1e-12 {
            std::f64::consts::PI.sqrt()
        } else {
            (x - 1.0) * gamma(x - 1.0)
        }
    }
    let c = gamma((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * gamma(df / 2.0));
    let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let steps = 20_000;
    let h = t / steps as f64;
    let mut s = pdf(0.0) + pdf(t);
    for i in 1..steps {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 - s * h / 3.0
}

const SURFACES: &[&str] = &["Nick", "Nick Flynn", "Flynn", "Phil", "he", "He", "him", "his", "himself", "the doctor", "The doctor"];

fn mini_conll(mentions: &[(usize, &str)]) -> String {
    let pos = |w: &str| match w {
        "he" | "He" | "him" | "himself" => "PRP",
        "his" => "PRP$",
        "the" | "The" => "DT",
        "doctor" => "NN",
        _ => "NNP",
    };
    let mut out = String::from("#begin document (t); part 000\n");
    for (chain, surface) in mentions {
        let words: Vec<&str> = surface.split(' ').collect();
        for (i, w) in words.iter().enumerate() {
            let coref = match (i == 0, i + 1 == words.len()) {
                (true, true) => format!("({chain})"),
                (true, false) => format!("({chain}"),
                (false, true) => format!("{chain})"),
                _ => "-".into(),
            };
            out.push_str(&format!("t\t0\t{i}\t{w}\t{}\t*\t-\t-\t-\t-\t*\t{coref}\n", pos(w)));
        }
        out.push_str(&format!("t\t0\t{}\tleft\tVBD\t*\tleave\t-\t-\t-\t*\t-\n\n", words.len()));
    }
    out + "#end document\n"
}

fn data_reduction(dir: &Path) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..500 {
        let mentions: Vec<(usize, &str)> =
            (0..rng.gen_range(1..16)).map(|_| (rng.gen_range(0..3), *SURFACES.choose(&mut rng).unwrap())).collect();
        let doc = load_conll_document(&mini_conll(&mentions)).map_err(|e| e.to_string())?;
        for chain in mentions.iter().map(|m| m.0).collect::<BTreeSet<_>>() {
            let brute: BTreeSet<String> = mentions
                .iter()
                .filter(|m| m.0 == chain)
                .map(|(_, s)| {
                    let lower = ["he", "him", "his", "himself", "the"].contains(&s.split(' ').next().unwrap().to_lowercase().as_str());
                    if lower {
                        s[..1].to_lowercase() + &s[1..]
                    } else {
                        s.to_string()
                    }
                })
                .collect();
            for ex in extract_ranking_examples(&doc, &ChainId::new(chain.to_string()), 5, 3) {
                let got: BTreeSet<String> = ex.candidate_set.iter().cloned().collect();
                ensure(got.len() == ex.candidate_set.len() && got == brute, format!("{got:?} vs {brute:?}"))?;
                ensure(ex.gold_index().is_some(), "gold string missing from its candidate set")?;
            }
        }
    }
    let mut detail = "500 random chain sets match brute force, gold always a candidate".to_owned();
    if let Ok(conll) = std::env::var("POVSHIFT_CONLL_TRAIN") {
        let mut files = Vec::new();
        let mut stack = vec![PathBuf::from(conll)];
        while let Some(d) = stack.pop() {
            for entry in std::fs::read_dir(&d).map_err(|e| format!("{}: {e}", d.display()))? {
                let path = entry.map_err(|e| e.to_string())?.path();
                if path.is_dir() {
                    stack.push(path);
                } else if path.to_string_lossy().ends_with("gold_conll") {
                    files.push(path);
                }
            }
        }
        files.sort();
        let list = dir.join("train");
        std::fs::create_dir_all(&list).unwrap();
        for (i, f) in files.iter().enumerate() {
            std::os::unix::fs::symlink(f, list.join(format!("{i:05}.v4_gold_conll"))).map_err(|e| e.to_string())?;
        }
        let (out, _) = cli(&["stats", list.to_str().unwrap()])?;
        let row = text(out);
        let fields: Vec<&str> = row.lines().nth(1).unwrap_or("").split(',').collect();
        ensure(fields.get(1..3) == Some(&["1952", "11727"][..]), format!("licensed corpus stats {row:?}"))?;
        detail.push_str("; licensed train split 1952 entities / 11727 mentions");
    } else {
        detail.push_str("; licensed corpus check skipped (POVSHIFT_CONLL_TRAIN unset)");
    }
    Ok(detail)
}

fn determinism(dir: &Path) -> Outcome {
    let nick = example("nick.json");
    // both runs use the same paths since some commands echo them
    let run_all = || -> Result<Vec<Vec<u8>>, String> {
        let d = dir.join("rerun");
        let _ = std::fs::remove_dir_all(&d);
        std::fs::create_dir_all(&d).unwrap();
        let p = |name: &str| d.join(name).to_str().unwrap().to_owned();
        let ratings = p("ratings.csv");
        std::fs::write(&ratings, "worker,sentence,mention,amb,correct,nat\nw,a,1,2,1,2\nw,a,2,1,0,2\nv,a,1,impossible,,0\n").unwrap();
        let mut outs = Vec::new();
        outs.push(cli(&["extract-data", &nick, "--out", &p("ex.jsonl"), "--stats", &p("stats.csv")])?.0);
        outs.push(cli(&["--seed", "5", "train", "--examples", &p("ex.jsonl"), "--out", &p("r.model"), "--max-epochs", "3"])?.0);
        outs.push(cli(&["train", "--examples", &p("ex.jsonl"), "--out", &p("f.model"), "--baseline", "forest"])?.0);
        outs.push(cli(&["convert", &nick, "--model", &p("r.model"), "--json"])?.0);
        outs.push(cli(&["--seed", "9", "convert", &nick, "--baseline", "random", "--out-dir", &p("conv")])?.0);
        outs.push(cli(&["evaluate", "--gold", &nick, "--baseline", "forest", "--model", &p("f.model"), "--components", "--report", &p("report.json")])?.0);
        outs.push(cli(&["score-human-eval", &ratings, "--scatter", &p("scatter.csv")])?.0);
        outs.push(cli(&["--seed", "2", "ablate", "--examples", &p("ex.jsonl"), "--eval", &nick, "--max-epochs", "2", "--seeds", "1,2", "--out-dir", &p("abl")])?.0);
        outs.push(cli(&["stats", &nick])?.0);
        for f in ["ex.jsonl", "stats.csv", "r.model", "f.model", "conv/nick.json", "conv/nick.txt", "report.json", "scatter.csv", "abl/ablation.csv", "abl/ttests.csv", "abl/ablation.json"] {
            outs.push(std::fs::read(d.join(f)).map_err(|e| format!("{f}: {e}"))?);
        }
        Ok(outs)
    };
    let a = run_all()?;
    let b = run_all()?;
    let differing: Vec<usize> = (0..a.len()).filter(|i| a[*i] != b[*i]).collect();
    ensure(differing.is_empty(), format!("outputs {differing:?} differ between runs"))?;
    Ok(format!("{} outputs of 7 commands byte-identical across reruns", a.len()))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let p = HashEmbedding::default();
    let corpus = Corpus { train: synthetic(7, 20), dev: synthetic(8, 10), test: synthetic(9, 20) };
    let mut full_acc = Vec::new();
    let checks: Vec<(&str, Box<dyn FnOnce() -> Outcome + '_>)> = vec![
        ("pipeline fidelity", Box::new(|| pipeline_fidelity(dir.path()))),
        ("conjugation suite", Box::new(conjugation)),
        ("loss and scorer correctness", Box::new(loss_and_scorer)),
        ("capacity and feature ablation", Box::new(|| capacity(&corpus, &p, &mut full_acc))),
    ];
    let mut failed = 0;
    let mut report = |i: usize, name: &str, outcome: Outcome| {
        match outcome {
            Ok(d) => println!("criterion {i} {name}: PASS ({d})"),
            Err(d) => {
                failed += 1;
                println!("criterion {i} {name}: FAIL ({d})");
            }
        }
    };
    for (i, (name, check)) in checks.into_iter().enumerate() {
        report(i + 1, name, check());
    }
    report(5, "baseline ordering", baseline_ordering(&corpus, &p, &full_acc));
    report(6, "metric formulas", metrics());
    report(7, "data reduction", data_reduction(dir.path()));
    report(8, "determinism", determinism(dir.path()));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
