//! Annotation adapters, quote and narrator masking, focus and confounder identification.

use std::collections::BTreeSet;
use std::path::Path;

use log::warn;

use crate::document::{ChainId, Document, EntityKind, EntitySpec, Gender, Number, Pov, TokenSpan};
use crate::error::{Error, Result};
use crate::format::{ChainRecord, DocumentRecord, MentionRecord, TokenRecord, SCHEMA_VERSION};
use crate::pronoun::{self, Person};
use crate::DependencyArc;

const BUILTIN_PERFORMATIVES: &str = include_str!("../data/performative_verbs.txt");

/// Name and version of an annotation provider. Outputs are assumed fixed per version.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn version(&self) -> &str;
}

/// Tokenization, sentence split and coreference chains for raw text.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorefAnnotation {
    pub tokens: Vec<TokenRecord>,
    pub sentences: Vec<TokenSpan>,
    pub chains: Vec<(ChainId, Vec<TokenSpan>)>,
}

pub trait CorefProvider: Provider {
    fn resolve(&self, text: &str) -> Result<CorefAnnotation>;
}

/// Named-entity spans with their labels (`PERSON`, `ORG`, ...).
pub trait NerProvider: Provider {
    fn entities(&self, text: &str, tokens: &[TokenRecord]) -> Result<Vec<(TokenSpan, String)>>;
}

pub trait DepProvider: Provider {
    fn parse(
        &self,
        text: &str,
        tokens: &[TokenRecord],
        sentences: &[TokenSpan],
    ) -> Result<Vec<DependencyArc>>;
}

#[derive(Clone, Copy)]
pub struct AnnotationAdapters<'a> {
    pub coref: &'a dyn CorefProvider,
    pub ner: &'a dyn NerProvider,
    pub dep: &'a dyn DepProvider,
}

impl<'a> AnnotationAdapters<'a> {
    /// All three roles served by one provider.
    pub fn uniform<P: CorefProvider + NerProvider + DepProvider>(p: &'a P) -> Self {
        AnnotationAdapters {
            coref: p,
            ner: p,
            dep: p,
        }
    }

    /// Joined `name@version` strings, used to tag cached outputs.
    pub fn versions(&self) -> String {
        format!(
            "{}@{};{}@{};{}@{}",
            self.coref.name(),
            self.coref.version(),
            self.ner.name(),
            self.ner.version(),
            self.dep.name(),
            self.dep.version()
        )
    }
}

/// Serves annotations stored in a benchmark document.
#[derive(Clone, Debug)]
pub struct GoldAdapter {
    record: DocumentRecord,
}

impl GoldAdapter {
    pub const NAME: &'static str = "gold";

    pub fn new(record: DocumentRecord) -> Self {
        GoldAdapter { record }
    }

    pub fn record(&self) -> &DocumentRecord {
        &self.record
    }

    fn check_text(&self, text: &str) -> Result<()> {
        if text != self.record.text {
            return Err(Error::Argument(format!(
                "text does not match gold document {}",
                self.record.doc_id
            )));
        }
        Ok(())
    }
}

impl Provider for GoldAdapter {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn version(&self) -> &str {
        "schema-v1"
    }
}

impl CorefProvider for GoldAdapter {
    fn resolve(&self, text: &str) -> Result<CorefAnnotation> {
        self.check_text(text)?;
        Ok(CorefAnnotation {
            tokens: self.record.tokens.clone(),
            sentences: self.record.sentences.clone(),
            chains: self
                .record
                .chains
                .iter()
                .map(|c| (c.chain_id.clone(), c.mentions.iter().map(|m| m.span).collect()))
                .collect(),
        })
    }
}

impl NerProvider for GoldAdapter {
    fn entities(&self, text: &str, tokens: &[TokenRecord]) -> Result<Vec<(TokenSpan, String)>> {
        self.check_text(text)?;
        let mut out = Vec::new();
        for chain in &self.record.chains {
            match chain.entity_kind {
                Some(EntityKind::Person) => {
                    out.extend(chain.mentions.iter().map(|m| (m.span, "PERSON".to_owned())))
                }
                Some(EntityKind::Other) => {}
                None => out.extend(
                    tokens
                        .iter()
                        .enumerate()
                        .filter(|(i, t)| {
                            t.pos.starts_with("NNP") && chain.mentions.iter().any(|m| m.span.contains(*i))
                        })
                        .map(|(i, _)| (TokenSpan::single(i), "PERSON".to_owned())),
                ),
            }
        }
        Ok(out)
    }
}

impl DepProvider for GoldAdapter {
    fn parse(&self, text: &str, _: &[TokenRecord], _: &[TokenSpan]) -> Result<Vec<DependencyArc>> {
        self.check_text(text)?;
        Ok(self.record.dependencies.clone())
    }
}

fn provider_error(name: &str, version: &str, err: impl std::fmt::Display) -> Error {
    Error::Annotation {
        provider: name.to_owned(),
        version: version.to_owned(),
        message: err.to_string(),
    }
}

/// Runs the adapters over raw text and builds a document of person chains,
/// with quotes detected and narrator mentions flagged.
pub fn annotate(
    doc_id: &str,
    raw_text: &str,
    adapters: &AnnotationAdapters<'_>,
    performatives: &PerformativeLexicon,
) -> Result<Document> {
    if raw_text.trim().is_empty() {
        return Err(Error::Argument("cannot annotate empty text".into()));
    }
    let (cname, cver) = (adapters.coref.name(), adapters.coref.version());
    let coref = adapters
        .coref
        .resolve(raw_text)
        .map_err(|e| provider_error(cname, cver, e))?;
    let n = coref.tokens.len();
    for (id, spans) in &coref.chains {
        if let Some(s) = spans.iter().find(|s| s.end < s.start || s.end >= n) {
            return Err(provider_error(
                cname,
                cver,
                format!("chain {id} has mention [{}, {}] outside {n} tokens", s.start, s.end),
            ));
        }
    }
    let (nname, nver) = (adapters.ner.name(), adapters.ner.version());
    let entities = adapters
        .ner
        .entities(raw_text, &coref.tokens)
        .map_err(|e| provider_error(nname, nver, e))?;
    let (dname, dver) = (adapters.dep.name(), adapters.dep.version());
    let arcs = adapters
        .dep
        .parse(raw_text, &coref.tokens, &coref.sentences)
        .map_err(|e| provider_error(dname, dver, e))?;
    if let Some(a) = arcs
        .iter()
        .find(|a| a.head >= n || a.dependent >= n || a.head == a.dependent)
    {
        return Err(provider_error(
            dname,
            dver,
            format!("invalid arc {} -> {}", a.head, a.dependent),
        ));
    }

    let surfaces: Vec<&str> = coref.tokens.iter().map(|t| t.surface.as_str()).collect();
    let quoted_spans = quoted_spans_of(&surfaces, &coref.sentences);
    let persons: Vec<TokenSpan> = entities
        .iter()
        .filter(|(_, label)| label.eq_ignore_ascii_case("PERSON") || label == "PER")
        .map(|(s, _)| *s)
        .collect();

    let mut chains = Vec::new();
    for (id, spans) in coref.chains {
        let is_person = spans.iter().any(|s| {
            persons.iter().any(|p| p.overlaps(s))
                || (s.len() == 1
                    && pronoun::lookup(&coref.tokens[s.start].surface).is_some_and(|p| p.human))
        });
        if !is_person {
            continue;
        }
        let mut spans = spans;
        spans.sort_by_key(|s| (s.start, s.end));
        spans.dedup();
        chains.push(ChainRecord {
            chain_id: id,
            entity_kind: Some(EntityKind::Person),
            pov: None,
            number: None,
            gender: None,
            mentions: spans
                .into_iter()
                .map(|span| MentionRecord {
                    span,
                    case: None,
                    role: None,
                    in_quote: None,
                    narrator: false,
                })
                .collect(),
        });
    }
    let record = DocumentRecord {
        schema_version: SCHEMA_VERSION,
        doc_id: doc_id.to_owned(),
        genre: String::new(),
        text: raw_text.to_owned(),
        tokens: coref.tokens,
        sentences: coref.sentences,
        chains,
        quoted_spans,
        dependencies: arcs,
        focus: None,
        gold_replacements: Vec::new(),
        gold_verb_changes: Vec::new(),
    };
    let mut doc = record.into_document()?;
    mark_narrator_mentions(&mut doc, performatives);
    Ok(doc)
}

fn is_quote_mark(s: &str) -> Option<QuoteMark> {
    match s {
        "\"" => Some(QuoteMark::Straight),
        "“" | "``" => Some(QuoteMark::Open),
        "”" | "''" => Some(QuoteMark::Close),
        _ => None,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum QuoteMark {
    Straight,
    Open,
    Close,
}

pub(crate) fn quoted_spans_of(surfaces: &[&str], sentences: &[TokenSpan]) -> Vec<TokenSpan> {
    let sentence_end = |i: usize| {
        sentences
            .iter()
            .find(|s| s.contains(i))
            .map_or(surfaces.len().saturating_sub(1), |s| s.end)
    };
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let mut i = 0;
    while i < surfaces.len() {
        if let Some(start) = open {
            if i > sentence_end(start) {
                let end = sentence_end(start);
                warn!("unbalanced quotation mark at token {start}, closing at sentence end");
                if end > start {
                    out.push(TokenSpan::new(start + 1, end));
                }
                open = None;
                continue;
            }
        }
        match (is_quote_mark(surfaces[i]), open) {
            (Some(QuoteMark::Open), None) | (Some(QuoteMark::Straight), None) => open = Some(i),
            (Some(QuoteMark::Close), Some(start)) | (Some(QuoteMark::Straight), Some(start)) => {
                if i > start + 1 {
                    out.push(TokenSpan::new(start + 1, i - 1));
                }
                open = None;
            }
            (Some(QuoteMark::Close), None) => {
                warn!("closing quotation mark at token {i} without an opening one");
            }
            _ => {}
        }
        i += 1;
    }
    if let Some(start) = open {
        warn!("unbalanced quotation mark at token {start}, closing at sentence end");
        let end = sentence_end(start);
        if end > start {
            out.push(TokenSpan::new(start + 1, end));
        }
    }
    out
}

/// Token ranges strictly inside balanced double quotes. Unbalanced quotes close at
/// the end of their sentence.
pub fn detect_quoted_spans(doc: &Document) -> Vec<TokenSpan> {
    let surfaces: Vec<&str> = doc.tokens.iter().map(|t| t.surface.as_str()).collect();
    quoted_spans_of(&surfaces, &doc.sentences)
}

/// Recomputes quoted spans and the in-quote flag of every mention.
pub fn mark_quotes(doc: &mut Document) {
    doc.quoted_spans = detect_quoted_spans(doc);
    let quotes = doc.quoted_spans.clone();
    for chain in &mut doc.chains {
        for m in &mut chain.mentions {
            m.in_quote = quotes.iter().any(|q| q.covers(&m.span));
        }
    }
}

/// Lemmas of performative verbs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PerformativeLexicon {
    lemmas: BTreeSet<String>,
}

impl Default for PerformativeLexicon {
    fn default() -> Self {
        Self::parse(BUILTIN_PERFORMATIVES)
    }
}

impl PerformativeLexicon {
    pub fn parse(text: &str) -> Self {
        PerformativeLexicon {
            lemmas: text
                .lines()
                .map(|l| l.split('#').next().unwrap_or("").trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let lex = Self::parse(&std::fs::read_to_string(path)?);
        if lex.lemmas.is_empty() {
            return Err(Error::Argument(format!(
                "performative lexicon {} is empty",
                path.display()
            )));
        }
        Ok(lex)
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains(&lemma.to_lowercase())
    }
}

/// Identifies one mention by chain and position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MentionId {
    pub chain_id: ChainId,
    pub position: usize,
}

fn is_present_tense(pos: &str) -> bool {
    matches!(pos, "VBP" | "VB" | "")
}

/// First-person subjects of present-tense performative verbs ("I promise you", "I guess").
pub fn detect_narrator_mentions(doc: &Document, lexicon: &PerformativeLexicon) -> BTreeSet<MentionId> {
    let performative = |i: usize| {
        doc.tokens.get(i).is_some_and(|t| {
            is_present_tense(&t.pos) && (lexicon.contains(&t.lemma) || lexicon.contains(&t.surface))
        })
    };
    let mut out = BTreeSet::new();
    for chain in &doc.chains {
        for m in &chain.mentions {
            let first_subject = m.pronoun().is_some_and(|p| {
                p.person == Person::First && p.cases.contains(&crate::CaseClass::Nominative)
            });
            if !first_subject {
                continue;
            }
            let by_arc = doc.dependencies.iter().any(|a| {
                a.label.starts_with("nsubj") && m.span.contains(a.dependent) && performative(a.head)
            });
            if by_arc || performative(m.span.end + 1) {
                out.insert(MentionId {
                    chain_id: chain.chain_id.clone(),
                    position: m.position_in_chain,
                });
            }
        }
    }
    out
}

pub fn mark_narrator_mentions(doc: &mut Document, lexicon: &PerformativeLexicon) {
    let flagged = detect_narrator_mentions(doc, lexicon);
    for chain in &mut doc.chains {
        for m in &mut chain.mentions {
            if flagged.contains(&MentionId {
                chain_id: chain.chain_id.clone(),
                position: m.position_in_chain,
            }) {
                m.narrator = true;
            }
        }
    }
}

/// The unique singular chain narrated in the requested PoV, disambiguated by name.
pub fn identify_focus_chain(doc: &Document, spec: &EntitySpec, from_pov: Pov) -> Result<ChainId> {
    if from_pov == Pov::Third {
        return Err(Error::Argument("the original point of view must be first or second".into()));
    }
    let matching: Vec<_> = doc
        .chains
        .iter()
        .filter(|c| c.pov == from_pov && c.number == Number::Singular)
        .collect();
    let ids = |cs: &[&crate::CorefChain]| cs.iter().map(|c| c.chain_id.to_string()).collect();
    match matching.len() {
        0 => Err(Error::Identification {
            message: format!("no chain has the {from_pov:?} point of view"),
            candidates: Vec::new(),
        }),
        1 => Ok(matching[0].chain_id.clone()),
        _ => {
            let names = spec.names();
            let named: Vec<_> = matching
                .iter()
                .copied()
                .filter(|c| {
                    c.mentions
                        .iter()
                        .any(|m| names.iter().any(|n| m.string.contains(n)))
                })
                .collect();
            if named.is_empty() {
                return Err(Error::Identification {
                    message: format!(
                        "{} chains have the {from_pov:?} point of view",
                        matching.len()
                    ),
                    candidates: ids(&matching),
                });
            }
            let best = named
                .iter()
                .max_by(|a, b| {
                    a.mentions
                        .len()
                        .cmp(&b.mentions.len())
                        .then(b.mentions[0].span.start.cmp(&a.mentions[0].span.start))
                })
                .expect("non-empty");
            Ok(best.chain_id.clone())
        }
    }
}

/// Chains whose mentions become ambiguous once the focus turns third person.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Confounders {
    /// Singular chains with third-person pronouns of the focus gender.
    pub singular: Vec<ChainId>,
    /// Chains with plural pronouns in the original PoV ("we").
    pub plural: Vec<ChainId>,
}

impl Confounders {
    pub fn all(&self) -> impl Iterator<Item = &ChainId> {
        self.singular.iter().chain(self.plural.iter())
    }

    pub fn contains(&self, id: &ChainId) -> bool {
        self.all().any(|c| c == id)
    }
}

pub fn identify_confounders(
    doc: &Document,
    focus: &ChainId,
    focus_gender: Gender,
    from_pov: Pov,
) -> Confounders {
    let mut out = Confounders::default();
    for chain in doc.chains.iter().filter(|c| &c.chain_id != focus) {
        if chain.entity_kind != EntityKind::Person {
            continue;
        }
        let pronouns: Vec<_> = chain
            .mentions
            .iter()
            .filter(|m| !m.in_quote)
            .filter_map(|m| m.pronoun())
            .collect();
        let singular = pronouns.iter().any(|p| {
            p.person == Person::Third
                && p.number == Some(Number::Singular)
                && p.gender == focus_gender
                && focus_gender != Gender::Unknown
        });
        if singular {
            out.singular.push(chain.chain_id.clone());
            continue;
        }
        let plural = pronouns.iter().any(|p| {
            p.person == from_pov.person()
                && (p.number == Some(Number::Plural)
                    || (p.number.is_none() && chain.number == Number::Plural))
        });
        if plural {
            out.plural.push(chain.chain_id.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::document_from_json;

    fn doc(tokens: &[(&str, &str)], chains: &[(&str, &[(usize, usize)])]) -> Document {
        let mut text = String::new();
        let mut toks = Vec::new();
        for (s, pos) in tokens {
            if !text.is_empty() {
                text.push(' ');
            }
            let start = text.chars().count();
            text.push_str(s);
            toks.push(serde_json::json!({"surface": s, "pos": pos,
                "char_start": start, "char_end": start + s.chars().count()}));
        }
        let chains: Vec<_> = chains
            .iter()
            .map(|(id, spans)| {
                serde_json::json!({"chain_id": id,
                "mentions": spans.iter().map(|(s, e)| serde_json::json!({"span": [s, e]})).collect::<Vec<_>>()})
            })
            .collect();
        let json = serde_json::json!({"doc_id": "t", "text": text, "tokens": toks,
            "sentences": [[0, tokens.len() - 1]], "chains": chains});
        let mut d = document_from_json(&json.to_string()).unwrap();
        mark_quotes(&mut d);
        d
    }

    #[test]
    fn quote_inside_sentence() {
        let d = doc(
            &[("He", "PRP"), ("said", "VBD"), (",", ","), ("\"", "``"), ("I", "PRP"),
              ("am", "VBP"), ("here", "RB"), (".", "."), ("\"", "''")],
            &[],
        );
        assert_eq!(d.quoted_spans, vec![TokenSpan::new(4, 7)]);
    }

    #[test]
    fn unbalanced_quote_closes_at_sentence_end() {
        let d = doc(&[("“", "``"), ("Go", "VB"), ("home", "RB"), (".", ".")], &[]);
        assert_eq!(d.quoted_spans, vec![TokenSpan::new(1, 3)]);
    }

    #[test]
    fn narrator_patterns() {
        let lex = PerformativeLexicon::default();
        let d = doc(
            &[("I", "PRP"), ("promise", "VBP"), ("you", "PRP"), ("it", "PRP"), ("happened", "VBD")],
            &[("1", &[(0, 0)])],
        );
        assert_eq!(detect_narrator_mentions(&d, &lex).len(), 1);
        let d = doc(&[("I", "PRP"), ("drove", "VBD"), ("home", "NN")], &[("1", &[(0, 0)])]);
        assert!(detect_narrator_mentions(&d, &lex).is_empty());
        let d = doc(&[("I", "PRP"), ("guessed", "VBD"), ("wrong", "RB")], &[("1", &[(0, 0)])]);
        assert!(detect_narrator_mentions(&d, &lex).is_empty());
    }

    #[test]
    fn two_first_person_chains_are_ambiguous() {
        let d = doc(
            &[("I", "PRP"), ("left", "VBD"), ("and", "CC"), ("I", "PRP"), ("stayed", "VBD")],
            &[("1", &[(0, 0)]), ("2", &[(3, 3)])],
        );
        let spec = EntitySpec::focus(Gender::Masculine);
        match identify_focus_chain(&d, &spec, Pov::First) {
            Err(Error::Identification { candidates, .. }) => assert_eq!(candidates, ["1", "2"]),
            other => panic!("expected identification error, got {other:?}"),
        }
    }

    #[test]
    fn plural_first_person_chain_confounds() {
        let d = doc(
            &[("I", "PRP"), ("said", "VBD"), ("we", "PRP"), ("left", "VBD")],
            &[("1", &[(0, 0)]), ("2", &[(2, 2)])],
        );
        let focus = identify_focus_chain(&d, &EntitySpec::focus(Gender::Feminine), Pov::First).unwrap();
        assert_eq!(focus.as_str(), "1");
        let c = identify_confounders(&d, &focus, Gender::Feminine, Pov::First);
        assert_eq!(c.plural, vec![ChainId::from("2")]);
        assert!(c.singular.is_empty());
    }
}
