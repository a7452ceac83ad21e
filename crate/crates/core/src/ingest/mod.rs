//! Corpus readers and reduction of coreference chains to ranking examples.

mod conll;
mod pov;

use std::collections::HashMap;
use std::fmt::Write as _;

use log::warn;
use serde::{Deserialize, Serialize};

pub use conll::{load_conll_document, load_conll_documents, write_conll};
pub use pov::{load_pov_document, GoldEdits, PovDocument};

use crate::candidates::{candidate_string, canonicalize, narrow_by_case, Candidate, CandidateSource};
use crate::context::{ChainState, ContextBuilder, MentionKey, SlotContext};
use crate::document::{infer_chain_traits, ChainId, CorefChain, Document, EntityKind, Mention, Pov};
use crate::pronoun;

/// One mention slot with its candidate strings and the observed string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingExample {
    pub doc_id: String,
    pub chain_id: ChainId,
    pub mention_index: usize,
    pub gold_string: String,
    pub candidate_set: Vec<String>,
    pub context: SlotContext,
}

impl RankingExample {
    pub fn gold_index(&self) -> Option<usize> {
        self.candidate_set.iter().position(|c| *c == self.gold_string)
    }

    /// Examples with a single candidate yield no ranking pairs.
    pub fn has_pairs(&self) -> bool {
        self.candidate_set.len() >= 2
    }

    /// Indices of candidates that fit the slot's case, all of them if none fits.
    pub fn narrowed(&self) -> Vec<usize> {
        let fits: Vec<usize> = self
            .candidate_set
            .iter()
            .enumerate()
            .filter(|(_, c)| {
                crate::candidates::case_fits(&Candidate::new(c.as_str(), CandidateSource::ChainString), self.context.case)
            })
            .map(|(i, _)| i)
            .collect();
        if fits.is_empty() {
            (0..self.candidate_set.len()).collect()
        } else {
            fits
        }
    }
}

/// True when a first or second person pronoun appears outside quotes.
pub fn is_deictic_document(doc: &Document) -> bool {
    doc.tokens
        .iter()
        .any(|t| pronoun::is_deictic(&t.surface) && !doc.in_quotes(t.index))
}

/// Documents without deictic pronouns outside quotes.
pub fn filter_deictic_documents(corpus: Vec<Document>) -> Vec<Document> {
    corpus.into_iter().filter(|d| !is_deictic_document(d)).collect()
}

/// Person chains narrated in the third person.
pub fn select_person_chains(doc: &Document) -> Vec<&CorefChain> {
    doc.chains
        .iter()
        .filter(|c| c.entity_kind == EntityKind::Person && c.pov == Pov::Third)
        .collect()
}

/// Other person chains agreeing in number and gender with `focus`.
pub fn agreeing_chains(doc: &Document, focus: &CorefChain) -> Vec<ChainId> {
    let (_, _, _, conflict) = infer_chain_traits(&focus.mentions);
    if conflict {
        warn!("chain {} in {} has conflicting gender or number evidence", focus.chain_id, doc.doc_id);
    }
    select_person_chains(doc)
        .into_iter()
        .filter(|c| c.chain_id != focus.chain_id && c.number == focus.number && c.gender == focus.gender)
        .map(|c| c.chain_id.clone())
        .collect()
}

fn gold_string(doc: &Document, m: &Mention) -> String {
    candidate_string(doc, m)
}

/// One example per mention of `focus`; candidates are the chain's unique strings.
/// Left context holds the observed strings; mentions of the focus and its
/// agreeing chains to the right are unknown.
pub fn extract_ranking_examples(doc: &Document, focus: &ChainId, n: usize, k: usize) -> Vec<RankingExample> {
    let Some(chain) = doc.chain(focus) else {
        return Vec::new();
    };
    let candidates: Vec<String> = canonicalize(
        chain
            .mentions
            .iter()
            .map(|m| Candidate::new(gold_string(doc, m), CandidateSource::ChainString))
            .collect(),
    )
    .into_iter()
    .map(|c| c.string)
    .collect();
    let mut scheduled = vec![focus.clone()];
    scheduled.extend(agreeing_chains(doc, chain));
    let builder = ContextBuilder::new(doc, &scheduled, HashMap::new(), n, k, true);
    let ci = doc.chain_index(focus).expect("chain exists");
    let mut state = ChainState::default();
    let mut out = Vec::new();
    let mut by_key: HashMap<MentionKey, usize> = HashMap::new();
    for key in builder.scheduled_order() {
        let m = builder.mention(key);
        if key.chain == ci {
            by_key.insert(key, out.len());
            out.push(RankingExample {
                doc_id: doc.doc_id.clone(),
                chain_id: focus.clone(),
                mention_index: m.position_in_chain,
                gold_string: gold_string(doc, m),
                candidate_set: candidates.clone(),
                context: builder.slot(key, &state),
            });
        }
        state.resolve(key, gold_string(doc, m));
    }
    out
}

/// Examples for every person chain of every document.
pub fn extract_corpus(docs: &[Document], n: usize, k: usize) -> Vec<RankingExample> {
    docs.iter()
        .flat_map(|d| {
            select_person_chains(d)
                .into_iter()
                .flat_map(|c| extract_ranking_examples(d, &c.chain_id, n, k))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Counts behind a corpus summary row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub num_entities: usize,
    pub num_mentions: usize,
    pub mentions_per_entity: f64,
    pub num_docs: usize,
    pub num_words: usize,
}

pub fn corpus_stats(docs: &[Document]) -> CorpusStats {
    let mut s = CorpusStats {
        num_docs: docs.len(),
        ..CorpusStats::default()
    };
    for d in docs {
        s.num_words += d.word_count();
        for c in d.chains.iter().filter(|c| c.entity_kind == EntityKind::Person) {
            s.num_entities += 1;
            s.num_mentions += c.mentions.len();
        }
    }
    if s.num_entities > 0 {
        s.mentions_per_entity = s.num_mentions as f64 / s.num_entities as f64;
    }
    s
}

pub const STATS_HEADER: &str = "dataset,entities,mentions,men_per_ent,docs,words";

pub fn stats_csv(rows: &[(String, CorpusStats)]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for (name, s) in rows {
        let _ = writeln!(
            out,
            "{name},{},{},{:.1},{},{}",
            s.num_entities, s.num_mentions, s.mentions_per_entity, s.num_docs, s.num_words
        );
    }
    out
}

/// Candidate strings for examples built from gold conversions: case-narrowed
/// copies keep the slot's view consistent with inference.
pub fn narrowed_strings(cands: &[Candidate], m: &Mention) -> Vec<String> {
    narrow_by_case(cands, m).0.into_iter().map(|c| c.string).collect()
}
