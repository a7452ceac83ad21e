//! CoNLL-2012 `*_conll` column format.

use std::collections::{BTreeMap, HashMap};

use crate::context::detokenize_with_offsets;
use crate::document::{ChainId, Document, EntityKind, TokenSpan};
use crate::error::{Error, Result};
use crate::format::{ChainRecord, DocumentRecord, MentionRecord, TokenRecord, SCHEMA_VERSION};
use crate::preprocess::quoted_spans_of;
use crate::pronoun;
use crate::Role;

const MIN_COLUMNS: usize = 12;

#[derive(Default)]
struct Part {
    name: String,
    part: String,
    rows: Vec<Row>,
    sentence_breaks: Vec<usize>,
    chains: BTreeMap<String, Vec<TokenSpan>>,
    persons: Vec<TokenSpan>,
}

struct Row {
    word: String,
    pos: String,
    lemma: String,
}

fn unescape(word: &str) -> String {
    match word {
        "-LRB-" => "(".into(),
        "-RRB-" => ")".into(),
        "-LSB-" => "[".into(),
        "-RSB-" => "]".into(),
        "-LCB-" => "{".into(),
        "-RCB-" => "}".into(),
        w => w.strip_prefix('/').filter(|r| !r.is_empty()).unwrap_or(w).to_owned(),
    }
}

fn parse_begin(line: &str, lineno: usize) -> Result<(String, String)> {
    let rest = line.trim_start_matches("#begin document").trim();
    let (name, part) = match rest.split_once(';') {
        Some((n, p)) => (n.trim(), p.trim().trim_start_matches("part").trim()),
        None => (rest, "000"),
    };
    let name = name.trim_start_matches('(').trim_end_matches(')');
    if name.is_empty() {
        return Err(Error::parse(lineno, "document name missing after #begin document"));
    }
    Ok((name.to_owned(), part.to_owned()))
}

fn parse_parts(text: &str) -> Result<Vec<Part>> {
    let mut parts = Vec::new();
    let mut current: Option<Part> = None;
    let mut open: HashMap<String, Vec<usize>> = HashMap::new();
    let mut open_ne: Option<(usize, String)> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.starts_with("#begin document") {
            if current.is_some() {
                return Err(Error::parse(lineno, "nested #begin document"));
            }
            let (name, part) = parse_begin(line, lineno)?;
            current = Some(Part {
                name,
                part,
                ..Part::default()
            });
            open.clear();
            open_ne = None;
            continue;
        }
        if line.starts_with("#end document") {
            let mut part = current
                .take()
                .ok_or_else(|| Error::parse(lineno, "#end document without #begin document"))?;
            if let Some((id, _)) = open.iter().find(|(_, v)| !v.is_empty()) {
                return Err(Error::parse(lineno, format!("unbalanced coreference bracket for chain {id}")));
            }
            if let Some(last) = part.sentence_breaks.last() {
                if *last == part.rows.len() {
                    part.sentence_breaks.pop();
                }
            }
            parts.push(part);
            continue;
        }
        let Some(part) = current.as_mut() else {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Err(Error::parse(lineno, "token line outside a document block"));
        };
        if line.is_empty() {
            if !part.rows.is_empty() && part.sentence_breaks.last() != Some(&part.rows.len()) {
                part.sentence_breaks.push(part.rows.len());
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() < MIN_COLUMNS {
            return Err(Error::parse(
                lineno,
                format!("expected at least {MIN_COLUMNS} columns, found {}", cols.len()),
            ));
        }
        let idx = part.rows.len();
        let word = unescape(cols[3]);
        let lemma = match cols[6] {
            "-" | "_" => word.to_lowercase(),
            l => l.to_owned(),
        };
        part.rows.push(Row {
            word,
            pos: cols[4].to_owned(),
            lemma,
        });

        let ne = cols[10];
        if let Some(label) = ne.strip_prefix('(') {
            let label = label.trim_end_matches(')').trim_end_matches('*').to_owned();
            open_ne = Some((idx, label));
        }
        if ne.ends_with(')') {
            if let Some((start, label)) = open_ne.take() {
                if label == "PERSON" {
                    part.persons.push(TokenSpan::new(start, idx));
                }
            }
        }

        let coref = cols[cols.len() - 1];
        if coref != "-" && coref != "_" {
            for piece in coref.split('|') {
                let opens = piece.starts_with('(');
                let closes = piece.ends_with(')');
                let id = piece.trim_start_matches('(').trim_end_matches(')');
                if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(Error::parse(lineno, format!("bad coreference field {coref:?}")));
                }
                if opens && closes {
                    part.chains.entry(id.to_owned()).or_default().push(TokenSpan::single(idx));
                } else if opens {
                    open.entry(id.to_owned()).or_default().push(idx);
                } else if closes {
                    let start = open.get_mut(id).and_then(Vec::pop).ok_or_else(|| {
                        Error::parse(lineno, format!("unbalanced coreference bracket for chain {id}"))
                    })?;
                    part.chains.entry(id.to_owned()).or_default().push(TokenSpan::new(start, idx));
                } else {
                    return Err(Error::parse(lineno, format!("bad coreference field {coref:?}")));
                }
            }
        }
    }
    if let Some(part) = current {
        return Err(Error::parse(
            text.lines().count(),
            format!("document {} not closed with #end document", part.name),
        ));
    }
    Ok(parts)
}

/// Subject if a verb follows the mention, object if a verb precedes it.
fn guess_role(rows: &[&Row], span: TokenSpan) -> Role {
    let mut j = span.end + 1;
    while rows.get(j).is_some_and(|r| r.pos.starts_with("RB")) {
        j += 1;
    }
    if rows.get(j).is_some_and(|r| r.pos.starts_with("VB") || r.pos == "MD") {
        return Role::Subject;
    }
    if span.start > 0 && rows[span.start - 1].pos.starts_with("VB") {
        return Role::Object;
    }
    Role::Other
}

fn build(name: String, parts: Vec<Part>) -> Result<Document> {
    let multi = parts.len() > 1;
    let mut rows: Vec<&Row> = Vec::new();
    let mut sentences = Vec::new();
    let mut chains: Vec<(ChainId, Vec<TokenSpan>)> = Vec::new();
    let mut persons = Vec::new();
    for part in &parts {
        let offset = rows.len();
        rows.extend(part.rows.iter());
        let mut start = 0;
        for b in part.sentence_breaks.iter().copied().chain(std::iter::once(part.rows.len())) {
            if b > start {
                sentences.push(TokenSpan::new(offset + start, offset + b - 1));
            }
            start = b;
        }
        for (id, spans) in &part.chains {
            let chain_id = if multi {
                ChainId::new(format!("{}:{id}", part.part))
            } else {
                ChainId::new(id.clone())
            };
            let mut spans: Vec<TokenSpan> = spans
                .iter()
                .map(|s| TokenSpan::new(s.start + offset, s.end + offset))
                .collect();
            spans.sort_by_key(|s| (s.start, s.end));
            spans.dedup();
            chains.push((chain_id, spans));
        }
        persons.extend(
            part.persons
                .iter()
                .map(|s| TokenSpan::new(s.start + offset, s.end + offset)),
        );
    }
    if rows.is_empty() {
        return Err(Error::parse(0, format!("document {name} has no tokens")));
    }
    let surfaces: Vec<&str> = rows.iter().map(|r| r.word.as_str()).collect();
    let (text, offsets) = detokenize_with_offsets(&surfaces);
    let quoted = quoted_spans_of(&surfaces, &sentences);
    let records = chains
        .into_iter()
        .map(|(chain_id, spans)| {
            let person = spans.iter().any(|s| {
                persons.iter().any(|p| p.overlaps(s))
                    || (s.len() == 1 && pronoun::lookup(&rows[s.start].word).is_some_and(|p| p.human))
            });
            ChainRecord {
                chain_id,
                entity_kind: Some(if person { EntityKind::Person } else { EntityKind::Other }),
                pov: None,
                number: None,
                gender: None,
                mentions: spans
                    .into_iter()
                    .map(|span| MentionRecord {
                        span,
                        case: None,
                        role: Some(guess_role(&rows, span)),
                        in_quote: None,
                        narrator: false,
                    })
                    .collect(),
            }
        })
        .collect();
    DocumentRecord {
        schema_version: SCHEMA_VERSION,
        doc_id: name,
        genre: String::new(),
        text,
        tokens: rows
            .iter()
            .zip(offsets)
            .map(|(r, (s, e))| TokenRecord {
                surface: r.word.clone(),
                pos: r.pos.clone(),
                lemma: r.lemma.clone(),
                char_start: s,
                char_end: e,
            })
            .collect(),
        sentences,
        chains: records,
        quoted_spans: quoted,
        dependencies: Vec::new(),
        focus: None,
        gold_replacements: Vec::new(),
        gold_verb_changes: Vec::new(),
    }
    .into_document()
}

/// Every document in a CoNLL file; parts of one document are concatenated.
pub fn load_conll_documents(text: &str) -> Result<Vec<Document>> {
    let mut grouped: Vec<(String, Vec<Part>)> = Vec::new();
    for part in parse_parts(text)? {
        match grouped.iter_mut().find(|(n, _)| *n == part.name) {
            Some((_, ps)) => ps.push(part),
            None => grouped.push((part.name.clone(), vec![part])),
        }
    }
    grouped
        .into_iter()
        .map(|(name, mut parts)| {
            parts.sort_by(|a, b| a.part.cmp(&b.part));
            let mut doc = build(name, parts)?;
            if let Some(genre) = doc.doc_id.split('/').next().filter(|g| *g != doc.doc_id) {
                doc.genre = genre.to_owned();
            }
            Ok(doc)
        })
        .collect()
}

/// A single CoNLL document block.
pub fn load_conll_document(text: &str) -> Result<Document> {
    let mut docs = load_conll_documents(text)?;
    match docs.len() {
        1 => Ok(docs.remove(0)),
        n => Err(Error::parse(0, format!("expected one document, found {n}"))),
    }
}

/// Writes a document back in CoNLL columns, one part. Person chains get PERSON
/// spans over their first non-pronominal mention.
pub fn write_conll(doc: &Document) -> String {
    let n = doc.tokens.len();
    let mut coref: Vec<Vec<String>> = vec![Vec::new(); n];
    let mut ne: Vec<String> = vec!["*".into(); n];
    let mut ne_used = vec![false; n];
    for chain in &doc.chains {
        let id = chain.chain_id.as_str().replace(':', "_");
        for m in &chain.mentions {
            if m.span.start == m.span.end {
                coref[m.span.start].push(format!("({id})"));
            } else {
                coref[m.span.start].push(format!("({id}"));
                coref[m.span.end].push(format!("{id})"));
            }
        }
        if chain.entity_kind == EntityKind::Person {
            let named = chain.mentions.iter().find(|m| {
                !pronoun::is_pronoun(&m.string) && (m.span.start..=m.span.end).all(|i| !ne_used[i])
            });
            if let Some(m) = named {
                for slot in &mut ne_used[m.span.start..=m.span.end] {
                    *slot = true;
                }
                if m.span.start == m.span.end {
                    ne[m.span.start] = "(PERSON)".into();
                } else {
                    ne[m.span.start] = "(PERSON*".into();
                    ne[m.span.end] = "*)".into();
                }
            }
        }
    }
    let mut out = format!("#begin document ({}); part 000\n", doc.doc_id);
    for (si, sent) in doc.sentences.iter().enumerate() {
        if si > 0 {
            out.push('\n');
        }
        for i in sent.start..=sent.end {
            let t = &doc.tokens[i];
            let c = if coref[i].is_empty() {
                "-".to_owned()
            } else {
                coref[i].join("|")
            };
            out.push_str(&format!(
                "{}\t0\t{}\t{}\t{}\t*\t{}\t-\t-\t-\t{}\t{}\n",
                doc.doc_id,
                i - sent.start,
                t.surface,
                if t.pos.is_empty() { "-" } else { &t.pos },
                if t.lemma.is_empty() { "-" } else { &t.lemma },
                ne[i],
                c
            ));
        }
    }
    out.push_str("\n#end document\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(word: &str, pos: &str, ne: &str, coref: &str) -> String {
        format!("d\t0\t0\t{word}\t{pos}\t*\t-\t-\t-\t-\t{ne}\t{coref}\n")
    }

    #[test]
    fn minimal_block() {
        let text = format!(
            "#begin document (d); part 000\n{}{}#end document\n",
            row("Phil", "NNP", "(PERSON)", "(0)"),
            row("left", "VBD", "*", "-")
        );
        let doc = load_conll_document(&text).unwrap();
        assert_eq!(doc.chains.len(), 1);
        assert_eq!(doc.chains[0].mentions.len(), 1);
        assert_eq!(doc.source_text, "Phil left");
    }

    #[test]
    fn nested_brackets() {
        let text = format!(
            "#begin document (d); part 000\n{}{}{}#end document\n",
            row("his", "PRP$", "*", "(0|(1)"),
            row("old", "JJ", "*", "-"),
            row("father", "NN", "*", "0)")
        );
        let doc = load_conll_document(&text).unwrap();
        let spans: Vec<_> = doc.chains.iter().map(|c| c.mentions[0].span).collect();
        assert_eq!(spans, vec![TokenSpan::new(0, 2), TokenSpan::new(0, 0)]);
    }

    #[test]
    fn short_row_names_line() {
        let text = "#begin document (d); part 000\nd 0 0 Phil NNP\n#end document\n";
        match load_conll_document(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unbalanced_bracket_names_chain() {
        let text = format!("#begin document (d); part 000\n{}#end document\n", row("x", "NN", "*", "(7"));
        let err = load_conll_document(&text).unwrap_err().to_string();
        assert!(err.contains("chain 7"), "{err}");
    }

    #[test]
    fn parts_are_concatenated() {
        let text = format!(
            "#begin document (d); part 000\n{}#end document\n#begin document (d); part 001\n{}#end document\n",
            row("Phil", "NNP", "(PERSON)", "(0)"),
            row("Emily", "NNP", "(PERSON)", "(0)")
        );
        let doc = load_conll_document(&text).unwrap();
        let ids: Vec<_> = doc.chains.iter().map(|c| c.chain_id.to_string()).collect();
        assert_eq!(ids, ["000:0", "001:0"]);
        assert_eq!(doc.sentences.len(), 2);
    }
}
