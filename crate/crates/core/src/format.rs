//! JSON document format (schema version 1).
//!
//! The wire records mirror `schema/document.v1.json`. Optional mention fields
//! (`case`, `role`, `in_quote`) and chain traits (`pov`, `number`, `gender`) are
//! inferred when absent, so gold annotation files only need spans.

use serde::{Deserialize, Serialize};

use crate::document::{
    case_class_of, infer_chain_traits, normalize_chain, CaseClass, ChainId, CorefChain,
    DependencyArc, Document, EntityKind, Gender, Mention, Number, Pov, Role, Token, TokenSpan,
};
use crate::error::{Error, Result};
use crate::pronoun;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenRecord {
    pub surface: String,
    pub pos: String,
    #[serde(default)]
    pub lemma: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionRecord {
    pub span: TokenSpan,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<CaseClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_quote: Option<bool>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub narrator: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain_id: ChainId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_kind: Option<EntityKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pov: Option<Pov>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    pub mentions: Vec<MentionRecord>,
}

/// Focus entity description carried by benchmark documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocusRecord {
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_name: Option<String>,
    pub from_pov: Pov,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldReplacement {
    pub chain_id: ChainId,
    pub span: TokenSpan,
    pub string: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldVerbChange {
    pub token: usize,
    pub string: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub doc_id: String,
    #[serde(default)]
    pub genre: String,
    pub text: String,
    pub tokens: Vec<TokenRecord>,
    pub sentences: Vec<TokenSpan>,
    #[serde(default)]
    pub chains: Vec<ChainRecord>,
    #[serde(default)]
    pub quoted_spans: Vec<TokenSpan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dependencies: Vec<DependencyArc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<FocusRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_replacements: Vec<GoldReplacement>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_verb_changes: Vec<GoldVerbChange>,
}

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// Grammatical role of the token span from subject/object dependency arcs.
pub fn role_from_arcs(arcs: &[DependencyArc], span: TokenSpan) -> Role {
    let mut role = Role::Other;
    for arc in arcs.iter().filter(|a| span.contains(a.dependent) && !span.contains(a.head)) {
        let label = arc.label.as_str();
        if label.starts_with("nsubj") || label.starts_with("csubj") {
            return Role::Subject;
        }
        if matches!(label, "obj" | "dobj" | "iobj") {
            role = Role::Object;
        }
    }
    role
}

impl DocumentRecord {
    /// Builds a document, inferring optional annotations. Errors carry a JSON path.
    pub fn into_document(self) -> Result<Document> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                "schema_version",
                format!("unsupported version {}", self.schema_version),
            ));
        }
        if self.tokens.is_empty() {
            return Err(Error::schema("tokens", "document has no tokens"));
        }
        let n = self.tokens.len();
        let mut sentence_of = vec![usize::MAX; n];
        for (si, s) in self.sentences.iter().enumerate() {
            if s.end < s.start || s.end >= n {
                return Err(Error::schema(
                    format!("sentences[{si}]"),
                    format!("range [{}, {}] outside {} tokens", s.start, s.end, n),
                ));
            }
            for slot in &mut sentence_of[s.start..=s.end] {
                *slot = si;
            }
        }
        if let Some(i) = sentence_of.iter().position(|s| *s == usize::MAX) {
            return Err(Error::schema(
                format!("tokens[{i}]"),
                "token not covered by any sentence",
            ));
        }
        let tokens: Vec<Token> = self
            .tokens
            .into_iter()
            .enumerate()
            .map(|(i, t)| Token {
                lemma: if t.lemma.is_empty() {
                    t.surface.to_lowercase()
                } else {
                    t.lemma
                },
                surface: t.surface,
                index: i,
                sentence_index: sentence_of[i],
                char_span: (t.char_start, t.char_end),
                pos: t.pos,
            })
            .collect();
        for (qi, q) in self.quoted_spans.iter().enumerate() {
            if q.end < q.start || q.end >= n {
                return Err(Error::schema(
                    format!("quoted_spans[{qi}]"),
                    format!("range [{}, {}] outside {} tokens", q.start, q.end, n),
                ));
            }
        }
        for (ai, a) in self.dependencies.iter().enumerate() {
            if a.head >= n || a.dependent >= n {
                return Err(Error::schema(
                    format!("dependencies[{ai}]"),
                    "arc index outside document",
                ));
            }
        }
        let mut chains = Vec::with_capacity(self.chains.len());
        for (ci, rec) in self.chains.into_iter().enumerate() {
            let mut mentions = Vec::with_capacity(rec.mentions.len());
            for (mi, m) in rec.mentions.into_iter().enumerate() {
                if m.span.end < m.span.start || m.span.end >= n {
                    return Err(Error::schema(
                        format!("chains[{ci}].mentions[{mi}].span"),
                        format!("range [{}, {}] outside {} tokens", m.span.start, m.span.end, n),
                    ));
                }
                let string = crate::document::span_text(&tokens, &self.text, m.span);
                let role = m
                    .role
                    .unwrap_or_else(|| role_from_arcs(&self.dependencies, m.span));
                let case_class = m
                    .case
                    .unwrap_or_else(|| case_class_of(&string, tokens.get(m.span.end + 1), role));
                let in_quote = m.in_quote.unwrap_or_else(|| {
                    self.quoted_spans.iter().any(|q| q.covers(&m.span))
                });
                mentions.push(Mention {
                    chain_id: rec.chain_id.clone(),
                    span: m.span,
                    string,
                    case_class,
                    role,
                    in_quote,
                    narrator: m.narrator,
                    position_in_chain: 0,
                });
            }
            let (pov, number, gender, _) = infer_chain_traits(&mentions);
            let is_person = mentions.iter().any(|m| {
                pronoun::lookup(&m.string).is_some_and(|p| p.human)
                    || (m.span.start..=m.span.end).any(|i| tokens[i].is_proper_noun())
            });
            let mut chain = CorefChain {
                chain_id: rec.chain_id,
                mentions,
                entity_kind: rec.entity_kind.unwrap_or(if is_person {
                    EntityKind::Person
                } else {
                    EntityKind::Other
                }),
                pov: rec.pov.unwrap_or(pov),
                number: rec.number.unwrap_or(number),
                gender: rec.gender.unwrap_or(gender),
            };
            normalize_chain(&tokens, &self.text, &mut chain);
            chains.push(chain);
        }
        Ok(Document {
            doc_id: self.doc_id,
            source_text: self.text,
            tokens,
            sentences: self.sentences,
            chains,
            quoted_spans: self.quoted_spans,
            genre: self.genre,
            dependencies: self.dependencies,
        })
    }

    pub fn from_document(doc: &Document) -> Self {
        DocumentRecord {
            schema_version: SCHEMA_VERSION,
            doc_id: doc.doc_id.clone(),
            genre: doc.genre.clone(),
            text: doc.source_text.clone(),
            tokens: doc
                .tokens
                .iter()
                .map(|t| TokenRecord {
                    surface: t.surface.clone(),
                    pos: t.pos.clone(),
                    lemma: t.lemma.clone(),
                    char_start: t.char_span.0,
                    char_end: t.char_span.1,
                })
                .collect(),
            sentences: doc.sentences.clone(),
            chains: doc
                .chains
                .iter()
                .map(|c| ChainRecord {
                    chain_id: c.chain_id.clone(),
                    entity_kind: Some(c.entity_kind),
                    pov: Some(c.pov),
                    number: Some(c.number),
                    gender: Some(c.gender),
                    mentions: c
                        .mentions
                        .iter()
                        .map(|m| MentionRecord {
                            span: m.span,
                            case: Some(m.case_class),
                            role: Some(m.role),
                            in_quote: Some(m.in_quote),
                            narrator: m.narrator,
                        })
                        .collect(),
                })
                .collect(),
            quoted_spans: doc.quoted_spans.clone(),
            dependencies: doc.dependencies.clone(),
            focus: None,
            gold_replacements: Vec::new(),
            gold_verb_changes: Vec::new(),
        }
    }
}

pub fn document_from_json(json: &str) -> Result<Document> {
    let record: DocumentRecord = serde_json::from_str(json)
        .map_err(|e| Error::schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    record.into_document()
}

pub fn document_to_json(doc: &Document) -> String {
    serde_json::to_string_pretty(&DocumentRecord::from_document(doc))
        .expect("document records always serialize")
}
