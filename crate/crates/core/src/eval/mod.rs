//! Automatic metrics, significance testing and the ablation harness.

mod ablation;
mod components;
pub mod human;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub use ablation::{ablation_run, AblationReport, AblationRow};
pub use components::{component_scores, pipeline_trace, ComponentTrace, Stage};

use crate::candidates::candidate_string;
use crate::document::ChainId;
use crate::error::{Error, Result};
use crate::format::GoldReplacement;
use crate::ingest::PovDocument;
use crate::pipeline::{convert, gold_result, ConversionPlan, ConversionResult, MentionSelector, Resources, Selection};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub doc_id: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_changed: usize,
    pub n_correct: usize,
    pub n_gold: usize,
}

/// Precision, recall and F1 over changed words.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_changed: usize,
    pub n_correct: usize,
    pub n_gold: usize,
    pub per_document: Vec<DocumentScore>,
}

/// P = correct/changed and R = correct/gold; a ratio with nothing to count is 0,
/// except that an empty prediction against an empty gold scores 1.
pub fn prf(n_changed: usize, n_correct: usize, n_gold: usize) -> (f64, f64, f64) {
    if n_changed == 0 && n_gold == 0 {
        return (1.0, 1.0, 1.0);
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(n_correct, n_changed);
    let r = ratio(n_correct, n_gold);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

impl ScoreReport {
    pub fn from_counts(doc_id: &str, n_changed: usize, n_correct: usize, n_gold: usize) -> Self {
        let (precision, recall, f1) = prf(n_changed, n_correct, n_gold);
        ScoreReport {
            precision,
            recall,
            f1,
            n_changed,
            n_correct,
            n_gold,
            per_document: vec![DocumentScore { doc_id: doc_id.to_owned(), precision, recall, f1, n_changed, n_correct, n_gold }],
        }
    }

    /// Pools the counts of several reports.
    pub fn combine(reports: &[ScoreReport]) -> Self {
        let sum = |f: fn(&ScoreReport) -> usize| reports.iter().map(f).sum::<usize>();
        let (n_changed, n_correct, n_gold) = (sum(|r| r.n_changed), sum(|r| r.n_correct), sum(|r| r.n_gold));
        let (precision, recall, f1) = prf(n_changed, n_correct, n_gold);
        ScoreReport {
            precision,
            recall,
            f1,
            n_changed,
            n_correct,
            n_gold,
            per_document: reports.iter().flat_map(|r| r.per_document.iter().cloned()).collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("doc_id,precision,recall,f1,n_changed,n_correct,n_gold\n");
        let row = |out: &mut String, id: &str, p: f64, r: f64, f: f64, a: usize, b: usize, c: usize| {
            out.push_str(&format!("{id},{p:.4},{r:.4},{f:.4},{a},{b},{c}\n"));
        };
        for d in &self.per_document {
            row(&mut out, &d.doc_id, d.precision, d.recall, d.f1, d.n_changed, d.n_correct, d.n_gold);
        }
        row(&mut out, "ALL", self.precision, self.recall, self.f1, self.n_changed, self.n_correct, self.n_gold);
        out
    }
}

/// Words written at each edited character span.
fn changed_words(r: &ConversionResult) -> HashMap<(usize, usize), Vec<&str>> {
    let mut out: HashMap<(usize, usize), Vec<&str>> = HashMap::new();
    let mentions = r.mention_edits.iter().map(|e| ((e.char_start, e.char_end), e.new.as_str()));
    let verbs = r.verb_edits.iter().map(|e| ((e.char_start, e.char_end), e.new.as_str()));
    for (span, new) in mentions.chain(verbs) {
        out.entry(span).or_default().extend(new.split_whitespace());
    }
    out
}

/// Word-level comparison of a predicted conversion against the gold one. A
/// predicted word is correct when the gold edit at the same place writes it too.
pub fn score_conversion(predicted: &ConversionResult, gold: &ConversionResult) -> Result<ScoreReport> {
    if predicted.doc_id != gold.doc_id {
        return Err(Error::Argument(format!(
            "prediction for {} compared with gold for {}",
            predicted.doc_id, gold.doc_id
        )));
    }
    let pred = changed_words(predicted);
    let gold_words = changed_words(gold);
    let n_changed = pred.values().map(Vec::len).sum();
    let n_gold = gold_words.values().map(Vec::len).sum();
    let mut n_correct = 0;
    for (span, words) in &pred {
        let Some(g) = gold_words.get(span) else { continue };
        let mut remaining: Vec<&str> = g.clone();
        for w in words {
            if let Some(i) = remaining.iter().position(|x| x == w) {
                remaining.swap_remove(i);
                n_correct += 1;
            }
        }
    }
    Ok(ScoreReport::from_counts(&predicted.doc_id, n_changed, n_correct, n_gold))
}

/// Fraction of gold slots whose predicted string matches exactly.
pub fn mention_selection_accuracy(predicted: &[GoldReplacement], gold: &[GoldReplacement]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let pred: HashMap<(&ChainId, _), &str> =
        predicted.iter().map(|p| ((&p.chain_id, p.span), p.string.as_str())).collect();
    let correct = gold
        .iter()
        .filter(|g| pred.get(&(&g.chain_id, g.span)).is_some_and(|s| *s == g.string))
        .count();
    correct as f64 / gold.len() as f64
}

pub fn selection_slots(selections: &[Selection]) -> Vec<GoldReplacement> {
    selections
        .iter()
        .map(|s| GoldReplacement { chain_id: s.chain_id.clone(), span: s.span, string: s.string.clone() })
        .collect()
}

/// Gold string of every mention the plan converts: the gold replacement, or the
/// original string where the benchmark gives none.
pub fn gold_slots(pov: &PovDocument, plan: &ConversionPlan) -> Vec<GoldReplacement> {
    let gold: HashMap<(&ChainId, _), &str> =
        pov.gold.replacements.iter().map(|r| ((&r.chain_id, r.span), r.string.as_str())).collect();
    let mut out = Vec::new();
    for id in plan.scheduled_chains() {
        let Some(chain) = pov.doc.chain(&id) else { continue };
        for m in chain.active_mentions() {
            let string = gold
                .get(&(&m.chain_id, m.span))
                .map(|s| (*s).to_owned())
                .unwrap_or_else(|| candidate_string(&pov.doc, m));
            out.push(GoldReplacement { chain_id: m.chain_id.clone(), span: m.span, string });
        }
    }
    out.sort_by_key(|r| (r.span.start, r.span.end));
    out
}

/// One benchmark document run through the pipeline and scored.
#[derive(Clone, Debug)]
pub struct DocumentEvaluation {
    pub predicted: ConversionResult,
    pub gold: ConversionResult,
    pub report: ScoreReport,
    pub accuracy: f64,
    pub slots: usize,
}

pub fn evaluate_document(
    pov: &PovDocument,
    res: &Resources,
    selector: &mut dyn MentionSelector,
    n: usize,
    k: usize,
) -> Result<DocumentEvaluation> {
    let (spec, from_pov) = pov
        .focus_spec()
        .ok_or_else(|| Error::Argument(format!("document {} has no focus description", pov.doc.doc_id)))?;
    let (plan, predicted, selections) = convert(&pov.doc, &spec, from_pov, res, selector, n, k)?;
    let gold = gold_result(pov);
    let report = score_conversion(&predicted, &gold)?;
    let slots = gold_slots(pov, &plan);
    let accuracy = mention_selection_accuracy(&selection_slots(&selections), &slots);
    Ok(DocumentEvaluation { predicted, gold, report, accuracy, slots: slots.len() })
}

/// One-tailed paired t-test of mean(a - b) > 0.
///
/// With no variance in the differences the result is 1 when the mean difference is
/// not positive and 0 otherwise.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!("paired samples differ in length: {} vs {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::Argument("a paired t-test needs at least two pairs".into()));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let scale = d.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    if sd <= 1e-12 * scale {
        return Ok(if mean > 1e-12 * scale { 0.0 } else { 1.0 });
    }
    let t = mean / (sd / n.sqrt());
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).map_err(|e| Error::Argument(e.to_string()))?;
    Ok(dist.sf(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::TokenSpan;
    use crate::pipeline::{MentionEditRecord, VerbEditRecord};

    fn edit(start: usize, end: usize, new: &str) -> MentionEditRecord {
        MentionEditRecord { char_start: start, char_end: end, old: "x".into(), new: new.into(), chain_id: ChainId::new("e") }
    }

    fn result(edits: Vec<MentionEditRecord>) -> ConversionResult {
        ConversionResult { doc_id: "d".into(), text: String::new(), mention_edits: edits, verb_edits: vec![] }
    }

    #[test]
    fn word_counts() {
        // 14 gold words at 14 places; 10 predicted, 7 of them right
        let gold = result((0..14).map(|i| edit(i * 10, i * 10 + 1, "he")).collect());
        let pred = result(
            (0..10).map(|i| edit(i * 10, i * 10 + 1, if i < 7 { "he" } else { "Nick" })).collect(),
        );
        let r = score_conversion(&pred, &gold).unwrap();
        assert_eq!((r.n_changed, r.n_correct, r.n_gold), (10, 7, 14));
        assert!((r.precision - 0.7).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
        assert!((r.f1 - 0.7 / 1.2).abs() < 1e-12);
        let same = score_conversion(&gold, &gold).unwrap();
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        let none = score_conversion(&result(vec![]), &gold).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn multi_word_and_verbs() {
        let mut gold = result(vec![edit(0, 1, "Nick Flynn")]);
        gold.verb_edits.push(VerbEditRecord { char_start: 2, char_end: 7, old: "drive".into(), new: "drives".into(), rule: None });
        let pred = result(vec![edit(0, 1, "Nick")]);
        let r = score_conversion(&pred, &gold).unwrap();
        assert_eq!((r.n_changed, r.n_correct, r.n_gold), (1, 1, 3));
        let mut other = pred.clone();
        other.doc_id = "e".into();
        assert!(score_conversion(&other, &gold).is_err());
    }

    fn slot(i: usize, s: &str) -> GoldReplacement {
        GoldReplacement { chain_id: ChainId::new("e"), span: TokenSpan::single(i), string: s.into() }
    }

    #[test]
    fn accuracy() {
        let gold = vec![slot(0, "Nick"), slot(1, "he"), slot(2, "his"), slot(3, "him")];
        let pred = vec![slot(0, "Nick"), slot(1, "he"), slot(2, "his"), slot(3, "Nick")];
        assert_eq!(mention_selection_accuracy(&pred, &gold), 0.75);
        assert_eq!(mention_selection_accuracy(&[slot(0, "nick")], &[slot(0, "Nick")]), 0.0);
        assert_eq!(mention_selection_accuracy(&gold, &gold), 1.0);
    }

    #[test]
    fn t_test_conventions() {
        let a = [0.72, 0.75, 0.71, 0.74];
        assert_eq!(paired_t_test(&a, &a).unwrap(), 1.0);
        let b: Vec<f64> = a.iter().map(|x| x - 0.05).collect();
        assert!(paired_t_test(&a, &b).unwrap() < 1e-12);
        assert!(paired_t_test(&a, &a[..3]).is_err());
        assert!(paired_t_test(&a[..1], &a[..1]).is_err());
    }

    #[test]
    fn t_test_antisymmetric() {
        let a = [0.61, 0.75, 0.52, 0.74, 0.66];
        let b = [0.60, 0.70, 0.58, 0.69, 0.61];
        let p = paired_t_test(&a, &b).unwrap();
        let q = paired_t_test(&b, &a).unwrap();
        assert!((p + q - 1.0).abs() < 1e-12);
    }
}
