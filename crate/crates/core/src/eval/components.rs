//! Per-stage scores with gold inputs to every stage.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use log::info;

use super::{gold_slots, mention_selection_accuracy, selection_slots, ScoreReport};
use crate::document::{ChainId, Document, TokenSpan};
use crate::error::{Error, Result};
use crate::format::GoldReplacement;
use crate::ingest::PovDocument;
use crate::morph::Tense;
use crate::pipeline::{plan_conversion, select_mentions, MentionSelector, Resources};

/// What one run produced at each stage, or the gold version of it. Absent stages
/// are skipped.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComponentTrace {
    pub doc_id: String,
    pub chains: Option<Vec<(ChainId, Vec<TokenSpan>)>>,
    /// Tokens whose verb form changes.
    pub verb_tokens: Option<BTreeSet<usize>>,
    pub conjugations: Option<BTreeMap<usize, String>>,
    pub candidate_sets: Option<BTreeMap<ChainId, BTreeSet<String>>>,
    pub selections: Option<Vec<GoldReplacement>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub name: &'static str,
    pub report: ScoreReport,
}

fn set_report<T: Ord>(doc_id: &str, pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> ScoreReport {
    ScoreReport::from_counts(doc_id, pred.len(), pred.intersection(gold).count(), gold.len())
}

/// Mentions of predicted chains that land in the gold chain they are matched to.
/// Chains are matched one to one, largest overlap first.
fn coref_report(doc_id: &str, pred: &[(ChainId, Vec<TokenSpan>)], gold: &[(ChainId, Vec<TokenSpan>)]) -> ScoreReport {
    let sets = |cs: &[(ChainId, Vec<TokenSpan>)]| -> Vec<BTreeSet<(usize, usize)>> {
        cs.iter().map(|(_, s)| s.iter().map(|s| (s.start, s.end)).collect()).collect()
    };
    let (p, g) = (sets(pred), sets(gold));
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, ps) in p.iter().enumerate() {
        for (j, gs) in g.iter().enumerate() {
            let o = ps.intersection(gs).count();
            if o > 0 {
                pairs.push((o, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let (mut used_p, mut used_g) = (BTreeSet::new(), BTreeSet::new());
    let mut correct = 0;
    for (o, i, j) in pairs {
        if used_p.contains(&i) || used_g.contains(&j) {
            continue;
        }
        used_p.insert(i);
        used_g.insert(j);
        correct += o;
    }
    let total = |s: &[BTreeSet<(usize, usize)>]| s.iter().map(BTreeSet::len).sum::<usize>();
    ScoreReport::from_counts(doc_id, total(&p), correct, total(&g))
}

/// Scores each stage present in both traces.
pub fn component_scores(pred: &ComponentTrace, gold: &ComponentTrace) -> Vec<Stage> {
    let id = gold.doc_id.as_str();
    let mut out = Vec::new();
    let mut push = |name: &'static str, report: Option<ScoreReport>| match report {
        Some(report) => out.push(Stage { name, report }),
        None => info!("{id}: no gold or prediction for {name}; stage skipped"),
    };
    push(
        "coreference",
        pred.chains.as_ref().zip(gold.chains.as_ref()).map(|(p, g)| coref_report(id, p, g)),
    );
    push(
        "verb_identification",
        pred.verb_tokens.as_ref().zip(gold.verb_tokens.as_ref()).map(|(p, g)| set_report(id, p, g)),
    );
    push(
        "verb_conjugation",
        pred.conjugations.as_ref().zip(gold.conjugations.as_ref()).map(|(p, g)| {
            let p: BTreeSet<(usize, &String)> = p.iter().map(|(i, s)| (*i, s)).collect();
            let g: BTreeSet<(usize, &String)> = g.iter().map(|(i, s)| (*i, s)).collect();
            set_report(id, &p, &g)
        }),
    );
    push(
        "candidate_generation",
        pred.candidate_sets.as_ref().zip(gold.candidate_sets.as_ref()).map(|(p, g)| {
            let flat = |m: &BTreeMap<ChainId, BTreeSet<String>>| -> BTreeSet<(ChainId, String)> {
                m.iter().flat_map(|(c, s)| s.iter().map(move |x| (c.clone(), x.clone()))).collect()
            };
            set_report(id, &flat(p), &flat(g))
        }),
    );
    push(
        "candidate_coverage",
        pred.candidate_sets.as_ref().zip(gold.selections.as_ref()).map(|(sets, slots)| {
            let covered = slots
                .iter()
                .filter(|s| sets.get(&s.chain_id).is_some_and(|c| c.contains(&s.string)))
                .count();
            ScoreReport::from_counts(id, slots.len(), covered, slots.len())
        }),
    );
    push(
        "mention_selection",
        pred.selections.as_ref().zip(gold.selections.as_ref()).map(|(p, g)| {
            let acc = mention_selection_accuracy(p, g);
            let correct = (acc * g.len() as f64).round() as usize;
            ScoreReport::from_counts(id, g.len(), correct, g.len())
        }),
    );
    out
}

fn chains_of(doc: &Document) -> Vec<(ChainId, Vec<TokenSpan>)> {
    doc.chains.iter().map(|c| (c.chain_id.clone(), c.mentions.iter().map(|m| m.span).collect())).collect()
}

/// Runs every stage on a benchmark document with gold upstream inputs and returns
/// the predicted and gold traces. `system` is the same text as annotated by an
/// automatic coreference system, when one is available.
pub fn pipeline_trace(
    pov: &PovDocument,
    system: Option<&Document>,
    res: &Resources,
    selector: &mut dyn MentionSelector,
    n: usize,
    k: usize,
) -> Result<(ComponentTrace, ComponentTrace)> {
    let doc = &pov.doc;
    let (spec, from_pov) = pov
        .focus_spec()
        .ok_or_else(|| Error::Argument(format!("document {} has no focus description", doc.doc_id)))?;
    let plan = plan_conversion(doc, &spec, from_pov, res)?;
    let (_, selections) = select_mentions(doc, &plan, selector, n, k)?;

    let gold_verbs: BTreeMap<usize, String> =
        pov.gold.verb_changes.iter().map(|v| (v.token, v.string.clone())).collect();
    let mut conjugations = BTreeMap::new();
    for i in gold_verbs.keys() {
        let tok = doc
            .tokens
            .get(*i)
            .ok_or_else(|| Error::Argument(format!("gold verb token {i} out of range")))?;
        let (form, _) = res.conjugator.conjugate(&tok.surface, &tok.lemma, Tense::from_pos(&tok.pos))?;
        conjugations.insert(*i, form);
    }
    let sets: HashMap<&ChainId, BTreeSet<String>> = plan
        .entities
        .iter()
        .map(|e| (&e.chain_id, e.candidates.iter().map(|c| c.string.clone()).collect()))
        .collect();
    let pred = ComponentTrace {
        doc_id: doc.doc_id.clone(),
        chains: system.map(chains_of),
        verb_tokens: Some(plan.verb_edits.iter().filter(|v| v.changes()).map(|v| v.token_index).collect()),
        conjugations: Some(conjugations),
        candidate_sets: Some(sets.into_iter().map(|(k, v)| (k.clone(), v)).collect()),
        selections: Some(selection_slots(&selections)),
    };
    let gold = ComponentTrace {
        doc_id: doc.doc_id.clone(),
        chains: Some(chains_of(doc)),
        verb_tokens: Some(gold_verbs.keys().copied().collect()),
        conjugations: Some(gold_verbs),
        candidate_sets: None,
        selections: Some(gold_slots(pov, &plan)),
    };
    Ok((pred, gold))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(id: &str, spans: &[usize]) -> (ChainId, Vec<TokenSpan>) {
        (ChainId::new(id), spans.iter().map(|i| TokenSpan::single(*i)).collect())
    }

    #[test]
    fn dropped_chain_lowers_recall_only() {
        let gold = vec![chain("a", &[0, 3, 5]), chain("b", &[1, 7])];
        let pred = vec![chain("x", &[0, 3, 5])];
        let r = coref_report("d", &pred, &gold);
        assert_eq!(r.precision, 1.0);
        assert!((r.recall - 0.6).abs() < 1e-12);
        assert_eq!(coref_report("d", &gold, &gold).f1, 1.0);
    }

    #[test]
    fn identical_sets_score_one() {
        let mut sets = BTreeMap::new();
        sets.insert(ChainId::new("a"), ["Nick", "he"].iter().map(|s| s.to_string()).collect::<BTreeSet<_>>());
        let t = ComponentTrace { doc_id: "d".into(), candidate_sets: Some(sets), ..Default::default() };
        let stages = component_scores(&t, &t);
        assert_eq!(stages.len(), 1);
        assert_eq!(stages[0].name, "candidate_generation");
        assert_eq!(stages[0].report.f1, 1.0);
    }
}
