//! Structural validation of documents.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::document::{CaseClass, Document, Pov};
use crate::pronoun::{self, Person};

/// One broken invariant, with the path of the offending field.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Checks every document invariant. Returns an empty list for a well-formed document.
pub fn validate_document(doc: &Document) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = doc.tokens.len();

    let mut prev_end = 0usize;
    for (i, tok) in doc.tokens.iter().enumerate() {
        if tok.index != i {
            out.push(Violation::new(
                format!("tokens[{i}].index"),
                format!("expected dense index {i}, found {}", tok.index),
            ));
        }
        let (s, e) = tok.char_span;
        if e < s {
            out.push(Violation::new(
                format!("tokens[{i}].char_span"),
                format!("end {e} before start {s}"),
            ));
        }
        if i > 0 && s < prev_end {
            out.push(Violation::new(
                format!("tokens[{i}].char_span"),
                format!("starts at {s}, overlapping previous token ending at {prev_end}"),
            ));
        }
        prev_end = prev_end.max(e);
        match doc.sentences.get(tok.sentence_index) {
            Some(sent) if sent.contains(i) => {}
            _ => out.push(Violation::new(
                format!("tokens[{i}].sentence_index"),
                format!("sentence {} does not contain token {i}", tok.sentence_index),
            )),
        }
    }

    let mut expected_start = 0usize;
    for (si, sent) in doc.sentences.iter().enumerate() {
        if sent.start != expected_start || sent.end < sent.start || sent.end >= n {
            out.push(Violation::new(
                format!("sentences[{si}]"),
                format!(
                    "sentence [{}, {}] does not continue the partition at token {expected_start}",
                    sent.start, sent.end
                ),
            ));
        }
        expected_start = sent.end.saturating_add(1);
    }
    if n > 0 && expected_start != n {
        out.push(Violation::new(
            "sentences",
            format!("sentences cover {expected_start} of {n} tokens"),
        ));
    }

    let mut ids = BTreeSet::new();
    for (ci, chain) in doc.chains.iter().enumerate() {
        if !ids.insert(chain.chain_id.clone()) {
            out.push(Violation::new(
                format!("chains[{ci}].chain_id"),
                format!("duplicate chain id {}", chain.chain_id),
            ));
        }
        if chain.mentions.is_empty() {
            out.push(Violation::new(format!("chains[{ci}].mentions"), "chain has no mentions"));
        }
        let mut last_start = None;
        let mut deictic = BTreeSet::new();
        for (mi, m) in chain.mentions.iter().enumerate() {
            let path = format!("chains[{ci}].mentions[{mi}]");
            if m.chain_id != chain.chain_id {
                out.push(Violation::new(
                    format!("{path}.chain_id"),
                    format!("mention belongs to {}, listed under {}", m.chain_id, chain.chain_id),
                ));
            }
            if m.span.end < m.span.start || m.span.end >= n {
                out.push(Violation::new(
                    format!("{path}.span"),
                    format!("span [{}, {}] does not resolve to tokens", m.span.start, m.span.end),
                ));
            } else if doc.tokens[m.span.start].sentence_index != doc.tokens[m.span.end].sentence_index
            {
                out.push(Violation::new(
                    format!("{path}.span"),
                    format!("span [{}, {}] crosses a sentence boundary", m.span.start, m.span.end),
                ));
            }
            if let Some(prev) = last_start {
                if m.span.start < prev {
                    out.push(Violation::new(
                        format!("{path}.span"),
                        "mentions not sorted by document position",
                    ));
                }
            }
            last_start = Some(m.span.start);
            if m.position_in_chain != mi {
                out.push(Violation::new(
                    format!("{path}.position_in_chain"),
                    format!("expected {mi}, found {}", m.position_in_chain),
                ));
            }
            let is_pronoun = pronoun::is_pronoun(&m.string);
            if is_pronoun == (m.case_class == CaseClass::NonPronominal) {
                out.push(Violation::new(
                    format!("{path}.case"),
                    format!("case {:?} inconsistent with string {:?}", m.case_class, m.string),
                ));
            }
            if !m.in_quote {
                if let Some(info) = pronoun::lookup(&m.string) {
                    deictic.insert(info.person);
                }
            }
        }
        let expected = if deictic.contains(&Person::First) {
            Some(Pov::First)
        } else if deictic.contains(&Person::Second) {
            Some(Pov::Second)
        } else {
            None
        };
        let consistent = match (chain.pov, expected) {
            (Pov::Third, None) => true,
            (Pov::First, Some(_)) => deictic.contains(&Person::First),
            (Pov::Second, Some(_)) => deictic.contains(&Person::Second),
            _ => false,
        };
        if !consistent {
            out.push(Violation::new(
                format!("chains[{ci}].pov"),
                format!("pov {:?} disagrees with out-of-quote pronouns", chain.pov),
            ));
        }
    }

    let mut quotes: Vec<_> = doc.quoted_spans.iter().enumerate().collect();
    quotes.sort_by_key(|(_, q)| (q.start, q.end));
    let mut prev: Option<usize> = None;
    for (qi, q) in quotes {
        if q.end < q.start || q.end >= n {
            out.push(Violation::new(
                format!("quoted_spans[{qi}]"),
                format!("span [{}, {}] out of range", q.start, q.end),
            ));
        }
        if let Some(p) = prev {
            if q.start <= p {
                out.push(Violation::new(
                    format!("quoted_spans[{qi}]"),
                    "overlaps another quoted span",
                ));
            }
        }
        prev = Some(prev.map_or(q.end, |p| p.max(q.end)));
    }
    out
}
