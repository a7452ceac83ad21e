use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_povshift"));
    c.env_remove("POVSHIFT_CACHE");
    c
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn example(name: &str) -> String {
    format!("{}/../../data/examples/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const CONLL: &str = "#begin document (d); part 000
d\t0\t0\tPhil\tNNP\t*\t-\t-\t-\t-\t(PERSON)\t(0)
d\t0\t1\treturns\tVBZ\t*\treturn\t-\t-\t-\t*\t-
d\t0\t2\t.\t.\t*\t-\t-\t-\t-\t*\t-

d\t0\t0\tHe\tPRP\t*\t-\t-\t-\t-\t*\t(0)
d\t0\t1\tsmiles\tVBZ\t*\tsmile\t-\t-\t-\t*\t-
d\t0\t2\t.\t.\t*\t-\t-\t-\t-\t*\t-

#end document
";

#[test]
fn help_lists_every_command() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for c in ["extract-data", "train", "convert", "evaluate", "score-human-eval", "ablate", "stats"] {
        assert!(out.contains(c), "{c} missing from help");
    }
    for flag in ["--config", "--seed", "--jobs", "--verb-dict"] {
        assert!(out.contains(flag), "{flag} missing from help");
    }
    let (code, out, _) = run(&["convert", "--help"]);
    assert_eq!(code, 0);
    for flag in ["--baseline", "--gold-annotations", "--from-pov", "--focus-gender", "--focus-name", "--force"] {
        assert!(out.contains(flag), "{flag} missing from convert help");
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["stats", "--bogus", "x"]).0, 2);
    assert_eq!(run(&[]).0, 2);
    assert_eq!(run(&["train", "--examples", "/nonexistent/ex.jsonl", "--out", "/tmp/m"]).0, 2);
    assert_eq!(run(&["convert", &example("nick.json")]).0, 2, "no system given");
    assert_eq!(run(&["convert", &example("nick.json"), "--baseline", "svm"]).0, 2);
}

#[test]
fn malformed_conll_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.v4_gold_conll");
    std::fs::write(&bad, "#begin document (d); part 000\nd 0 0 Phil\n#end document\n").unwrap();
    let (code, _, err) = run(&["extract-data", p(&bad), "--out", p(&dir.path().join("x.jsonl"))]);
    assert_eq!(code, 2);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn extract_conll_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("mini.v4_gold_conll");
    std::fs::write(&file, CONLL).unwrap();
    let out = dir.path().join("ex.jsonl");
    let (code, _, err) = run(&["extract-data", p(&file), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    let lines = std::fs::read_to_string(&out).unwrap();
    assert_eq!(lines.lines().count(), 2);
    let (code, stdout, _) = run(&["stats", p(&file)]);
    assert_eq!(code, 0);
    assert_eq!(stdout, "dataset,entities,mentions,men_per_ent,docs,words\nmini,1,2,2.0,1,6\n");
}

#[test]
fn empty_after_filter_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("first.v4_gold_conll");
    std::fs::write(&file, CONLL.replace("\tHe\t", "\tI\t")).unwrap();
    let out = dir.path().join("ex.jsonl");
    let (code, _, err) = run(&["extract-data", p(&file), "--out", p(&out)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn evaluate_gold_against_itself() {
    let (code, out, err) = run(&["evaluate", "--gold", &example("nick.json"), "--pred", &example("nick.json")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.starts_with("doc_id,precision,recall,f1,n_changed,n_correct,n_gold\n"), "{out}");
    assert!(out.contains("ALL,1.0000,1.0000,1.0000"), "{out}");
}

#[test]
fn quality_gate_exits_1() {
    let (code, out, _) =
        run(&["evaluate", "--gold", &example("nick.json"), "--baseline", "pronouns", "--min-f1", "0.99"]);
    assert_eq!(code, 1);
    assert!(out.contains("ALL,"));
    let (code, _, _) = run(&["evaluate", "--gold", &example("nick.json"), "--baseline", "pronouns", "--min-f1", "0.1"]);
    assert_eq!(code, 0);
}

fn train_tiny(dir: &Path, dim: &str) -> PathBuf {
    let ex = dir.join("nick.jsonl");
    assert_eq!(run(&["extract-data", &example("nick.json"), "--out", p(&ex)]).0, 0);
    let model = dir.join(format!("r{dim}.model"));
    let (code, _, err) =
        run(&["--embedding-dim", dim, "train", "--examples", p(&ex), "--out", p(&model), "--max-epochs", "2"]);
    assert_eq!(code, 0, "{err}");
    model
}

#[test]
fn provider_mismatch_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_tiny(dir.path(), "8");
    let nick = example("nick.json");
    assert_eq!(run(&["--embedding-dim", "8", "convert", &nick, "--model", p(&model)]).0, 0);
    let (code, _, err) = run(&["--embedding-dim", "16", "convert", &nick, "--model", p(&model)]);
    assert_eq!(code, 2);
    assert!(err.contains("hash-v1-d8"), "{err}");
    // forcing skips the version check but the embedding width still has to fit
    let (code, _, err) = run(&["--embedding-dim", "16", "convert", &nick, "--model", p(&model), "--force"]);
    assert_eq!(code, 2);
    assert!(err.contains("8-dimensional"), "{err}");
}

#[test]
fn tree_baseline_trains_and_converts() {
    let dir = tempfile::tempdir().unwrap();
    let ex = dir.path().join("nick.jsonl");
    assert_eq!(run(&["extract-data", &example("nick.json"), "--out", p(&ex)]).0, 0);
    let model = dir.path().join("tree.model");
    let (code, _, err) = run(&["train", "--examples", p(&ex), "--out", p(&model), "--baseline", "tree"]);
    assert_eq!(code, 0, "{err}");
    let (code, out, err) = run(&["convert", &example("nick.json"), "--baseline", "tree", "--model", p(&model)]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("Phil returns to Boston"));
    assert_eq!(run(&["convert", &example("nick.json"), "--baseline", "gbt", "--model", p(&model)]).0, 2);
}

#[test]
fn convert_json_output_and_focus_flags() {
    let (code, out, err) = run(&["convert", &example("running_example.json"), "--baseline", "pronouns", "--json"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["mention_edits"][0]["old"], "I");
    assert_eq!(v["verb_edits"][0]["new"], "drives");
    let (code, _, _) = run(&["convert", &example("running_example.json"), "--baseline", "pronouns", "--from-pov", "second"]);
    assert_eq!(code, 2, "no second-person focus chain");
}

#[test]
fn config_file_and_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "seed = 3\n[model]\nmax_epochs = 1\n").unwrap();
    let ex = dir.path().join("ex.jsonl");
    assert_eq!(run(&["extract-data", &example("nick.json"), "--out", p(&ex)]).0, 0);
    let model = dir.path().join("m");
    let (code, _, err) = run(&["--config", p(&cfg), "train", "--examples", p(&ex), "--out", p(&model)]);
    assert_eq!(code, 0, "{err}");
    std::fs::write(&cfg, "sede = 3\n").unwrap();
    assert_eq!(run(&["--config", p(&cfg), "stats", &example("nick.json")]).0, 2);
}

#[test]
fn human_ratings() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("r.csv");
    std::fs::write(&csv, "worker,sentence,mention,amb,correct,nat\nw1,s1,m1,2,1,2\nw1,s1,m2,2,1,2\n").unwrap();
    let scatter = dir.path().join("scatter.csv");
    let (code, out, err) = run(&["score-human-eval", p(&csv), "--scatter", p(&scatter)]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["referential"], 2.0);
    assert_eq!(v["referential_percent"], 100.0);
    assert!(std::fs::read_to_string(&scatter).unwrap().starts_with("sentence,ref,nat\n"));
    std::fs::write(&csv, "worker,sentence,mention,amb,correct,nat\nw1,s1,m1,7,1,2\n").unwrap();
    assert_eq!(run(&["score-human-eval", p(&csv)]).0, 2);
}

#[test]
fn embedding_cache_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let ex = dir.path().join("ex.jsonl");
    assert_eq!(run(&["extract-data", &example("nick.json"), "--out", p(&ex)]).0, 0);
    let out = bin()
        .env("POVSHIFT_CACHE", &cache)
        .args(["train", "--examples", p(&ex), "--out", p(&dir.path().join("m")), "--max-epochs", "1"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
}
