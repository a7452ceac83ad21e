//! Scores from human ratings: per-sentence referential score and naturalness.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

pub const RATINGS_HEADER: &str = "worker,sentence,mention,amb,correct,nat";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Amb {
    /// 0 hard, 1 moderate, 2 easy.
    Level(u8),
    Impossible,
}

/// One worker's judgement of one mention.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HumanRating {
    pub worker: String,
    pub sentence: String,
    pub mention: String,
    /// `None` when the mention was left unrated.
    pub amb: Option<Amb>,
    /// Whether the worker mapped the mention to the right entity; absent for
    /// impossible ratings.
    pub correct: Option<bool>,
    pub nat: u8,
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Parses a ratings CSV with header `worker,sentence,mention,amb,correct,nat`.
pub fn parse_ratings(text: &str) -> Result<Vec<HumanRating>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != RATINGS_HEADER {
        return Err(Error::Parse { line: 1, message: format!("expected header `{RATINGS_HEADER}`") });
    }
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let bad = |message: String| Error::Parse { line, message };
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        if rec.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", rec.len())));
        }
        let amb = match &rec[3] {
            "" => None,
            "impossible" => Some(Amb::Impossible),
            "0" | "1" | "2" => Some(Amb::Level(rec[3].parse().expect("digit"))),
            other => return Err(bad(format!("amb must be 0, 1, 2 or impossible, found {other:?}"))),
        };
        let correct = match (&rec[4], amb) {
            ("", _) => None,
            (_, Some(Amb::Impossible)) => return Err(bad("an impossible rating carries no correctness flag".into())),
            (s, _) => Some(parse_bool(s).ok_or_else(|| bad(format!("correct must be 0 or 1, found {s:?}")))?),
        };
        if matches!(amb, Some(Amb::Level(_))) && correct.is_none() {
            return Err(bad("a rated mention needs a correctness flag".into()));
        }
        let nat = match &rec[5] {
            "0" | "1" | "2" => rec[5].parse().expect("digit"),
            other => return Err(bad(format!("nat must be 0, 1 or 2, found {other:?}"))),
        };
        out.push(HumanRating {
            worker: rec[0].to_owned(),
            sentence: rec[1].to_owned(),
            mention: rec[2].to_owned(),
            amb,
            correct,
            nat,
        });
    }
    Ok(out)
}

/// Mean over the sentence's mentions of amb times +1/-1 for a correct/incorrect
/// mapping; an impossible mention contributes -2.
pub fn referential_score(ratings: &[HumanRating]) -> Result<f64> {
    if ratings.is_empty() {
        return Err(Error::Argument("no ratings for the sentence".into()));
    }
    let mut total = 0.0;
    for r in ratings {
        total += match (r.amb, r.correct) {
            (Some(Amb::Impossible), _) => -2.0,
            (Some(Amb::Level(a)), Some(c)) => a as f64 * if c { 1.0 } else { -1.0 },
            _ => return Err(Error::Argument(format!("mention {} of sentence {} is unrated", r.mention, r.sentence))),
        };
    }
    Ok(total / ratings.len() as f64)
}

/// Means of per-worker (referential, naturalness) scores.
pub fn aggregate_scores(per_worker: &[(f64, f64)]) -> Result<(f64, f64)> {
    if per_worker.is_empty() {
        return Err(Error::Argument("no worker scores to aggregate".into()));
    }
    let n = per_worker.len() as f64;
    Ok((per_worker.iter().map(|s| s.0).sum::<f64>() / n, per_worker.iter().map(|s| s.1).sum::<f64>() / n))
}

/// Maps a referential score from [-2, 2] to [0, 100].
pub fn referential_percent(score: f64) -> f64 {
    (score + 2.0) / 4.0 * 100.0
}

/// Maps a naturalness score from [0, 2] to [0, 100].
pub fn naturalness_percent(score: f64) -> f64 {
    score / 2.0 * 100.0
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SentenceScore {
    pub sentence: String,
    pub referential: f64,
    pub naturalness: f64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HumanReport {
    pub sentences: Vec<SentenceScore>,
    pub referential: f64,
    pub naturalness: f64,
    pub referential_percent: f64,
    pub naturalness_percent: f64,
}

impl HumanReport {
    /// Per-sentence (ref, nat) pairs for scatter plots.
    pub fn scatter_csv(&self) -> String {
        let mut out = String::from("sentence,ref,nat\n");
        for s in &self.sentences {
            out.push_str(&format!("{},{:.4},{:.4}\n", s.sentence, s.referential, s.naturalness));
        }
        out
    }
}

/// Scores every sentence per worker, averages over workers, then over sentences.
pub fn score_ratings(ratings: &[HumanRating]) -> Result<HumanReport> {
    if ratings.is_empty() {
        return Err(Error::Argument("no ratings".into()));
    }
    let mut by_sentence: BTreeMap<&str, BTreeMap<&str, Vec<HumanRating>>> = BTreeMap::new();
    for r in ratings {
        by_sentence.entry(&r.sentence).or_default().entry(&r.worker).or_default().push(r.clone());
    }
    let mut sentences = Vec::new();
    for (sentence, workers) in by_sentence {
        let mut per_worker = Vec::new();
        for (worker, rs) in workers {
            if rs.iter().any(|r| r.nat != rs[0].nat) {
                return Err(Error::Argument(format!(
                    "worker {worker} gives sentence {sentence} more than one naturalness rating"
                )));
            }
            per_worker.push((referential_score(&rs)?, rs[0].nat as f64));
        }
        let (referential, naturalness) = aggregate_scores(&per_worker)?;
        sentences.push(SentenceScore { sentence: sentence.to_owned(), referential, naturalness, workers: per_worker.len() });
    }
    let n = sentences.len() as f64;
    let referential = sentences.iter().map(|s| s.referential).sum::<f64>() / n;
    let naturalness = sentences.iter().map(|s| s.naturalness).sum::<f64>() / n;
    Ok(HumanReport {
        referential,
        naturalness,
        referential_percent: referential_percent(referential),
        naturalness_percent: naturalness_percent(naturalness),
        sentences,
    })
}
