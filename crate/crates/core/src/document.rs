//! Shared domain types: tokens, mentions, coreference chains and documents.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pronoun::{self, Person};

/// Identifier of a coreference chain, unique within a document.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChainId(pub String);

impl ChainId {
    pub fn new(id: impl Into<String>) -> Self {
        ChainId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChainId {
    fn from(s: &str) -> Self {
        ChainId(s.to_owned())
    }
}

/// Inclusive range of token indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct TokenSpan {
    pub start: usize,
    pub end: usize,
}

impl TokenSpan {
    pub fn new(start: usize, end: usize) -> Self {
        TokenSpan { start, end }
    }

    pub fn single(index: usize) -> Self {
        TokenSpan { start: index, end: index }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, index: usize) -> bool {
        self.start <= index && index <= self.end
    }

    pub fn covers(&self, other: &TokenSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

impl From<[usize; 2]> for TokenSpan {
    fn from([start, end]: [usize; 2]) -> Self {
        TokenSpan { start, end }
    }
}

impl From<TokenSpan> for [usize; 2] {
    fn from(span: TokenSpan) -> Self {
        [span.start, span.end]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub index: usize,
    pub sentence_index: usize,
    /// Half-open character offsets into the source text.
    pub char_span: (usize, usize),
    pub pos: String,
    pub lemma: String,
}

impl Token {
    pub fn is_verb(&self) -> bool {
        self.pos.starts_with("VB") || self.pos == "MD"
    }

    pub fn is_finite_verb(&self) -> bool {
        matches!(self.pos.as_str(), "VBP" | "VBZ" | "VBD" | "MD")
    }

    pub fn is_proper_noun(&self) -> bool {
        self.pos.starts_with("NNP")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseClass {
    Nominative,
    Accusative,
    Possessive,
    Reflexive,
    NonPronominal,
}

impl CaseClass {
    pub const ALL: [CaseClass; 5] = [
        CaseClass::Nominative,
        CaseClass::Accusative,
        CaseClass::Possessive,
        CaseClass::Reflexive,
        CaseClass::NonPronominal,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Subject,
    Object,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Person,
    Other,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pov {
    First,
    Second,
    Third,
}

impl Pov {
    pub fn person(self) -> Person {
        match self {
            Pov::First => Person::First,
            Pov::Second => Person::Second,
            Pov::Third => Person::Third,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gender {
    Feminine,
    Masculine,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mention {
    pub chain_id: ChainId,
    pub span: TokenSpan,
    pub string: String,
    pub case_class: CaseClass,
    pub role: Role,
    pub in_quote: bool,
    pub narrator: bool,
    pub position_in_chain: usize,
}

impl Mention {
    /// Mentions inside quotes or attributed to the narrator keep their original form.
    pub fn is_masked(&self) -> bool {
        self.in_quote || self.narrator
    }

    pub fn pronoun(&self) -> Option<&'static pronoun::PronounInfo> {
        pronoun::lookup(&self.string)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorefChain {
    pub chain_id: ChainId,
    pub mentions: Vec<Mention>,
    pub entity_kind: EntityKind,
    pub pov: Pov,
    pub number: Number,
    pub gender: Gender,
}

impl CorefChain {
    /// Unique mention strings in order of first occurrence.
    pub fn unique_strings(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for m in &self.mentions {
            if seen.insert(m.string.clone()) {
                out.push(m.string.clone());
            }
        }
        out
    }

    pub fn active_mentions(&self) -> impl Iterator<Item = &Mention> {
        self.mentions.iter().filter(|m| !m.is_masked())
    }
}

/// Head/dependent arc from a dependency parse.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DependencyArc {
    pub head: usize,
    pub dependent: usize,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub source_text: String,
    pub tokens: Vec<Token>,
    pub sentences: Vec<TokenSpan>,
    pub chains: Vec<CorefChain>,
    pub quoted_spans: Vec<TokenSpan>,
    pub genre: String,
    pub dependencies: Vec<DependencyArc>,
}

impl Document {
    pub fn chain(&self, id: &ChainId) -> Option<&CorefChain> {
        self.chains.iter().find(|c| &c.chain_id == id)
    }

    pub fn chain_index(&self, id: &ChainId) -> Option<usize> {
        self.chains.iter().position(|c| &c.chain_id == id)
    }

    /// Text covered by a token span, taken from the source text when offsets allow it.
    pub fn span_text(&self, span: TokenSpan) -> String {
        span_text(&self.tokens, &self.source_text, span)
    }

    pub fn in_quotes(&self, index: usize) -> bool {
        self.quoted_spans.iter().any(|q| q.contains(index))
    }

    pub fn sentence_of(&self, index: usize) -> Option<usize> {
        self.tokens.get(index).map(|t| t.sentence_index)
    }

    pub fn word_count(&self) -> usize {
        self.tokens.len()
    }

    /// All mentions in document order (by start, longer spans first).
    pub fn mentions_in_order(&self) -> Vec<&Mention> {
        let mut all: Vec<&Mention> = self.chains.iter().flat_map(|c| c.mentions.iter()).collect();
        all.sort_by(|a, b| {
            a.span
                .start
                .cmp(&b.span.start)
                .then(b.span.end.cmp(&a.span.end))
                .then(a.chain_id.cmp(&b.chain_id))
        });
        all
    }
}

/// Case class of a mention string, using the following token to split "her".
pub fn case_class_of(string: &str, next: Option<&Token>, role: Role) -> CaseClass {
    match pronoun::lookup(string) {
        None => CaseClass::NonPronominal,
        Some(info) => {
            if info.cases.len() == 1 {
                return info.cases[0];
            }
            let poss = info.cases.contains(&CaseClass::Possessive);
            if poss {
                let nominal_next = next
                    .map(|t| t.pos.starts_with("NN") || t.pos.starts_with("JJ") || t.pos == "CD")
                    .unwrap_or(false);
                if nominal_next {
                    return CaseClass::Possessive;
                }
            }
            if info.cases.contains(&CaseClass::Nominative) && role == Role::Subject {
                return CaseClass::Nominative;
            }
            if info.cases.contains(&CaseClass::Accusative) {
                CaseClass::Accusative
            } else {
                info.cases[0]
            }
        }
    }
}

/// Point of view, number and gender implied by a chain's out-of-quote pronouns.
pub fn infer_chain_traits(mentions: &[Mention]) -> (Pov, Number, Gender, bool) {
    let mut pov = Pov::Third;
    let mut plural = false;
    let mut singular = false;
    let mut masc = false;
    let mut fem = false;
    for m in mentions.iter().filter(|m| !m.in_quote) {
        if let Some(info) = pronoun::lookup(&m.string) {
            match info.person {
                Person::First if pov == Pov::Third => pov = Pov::First,
                Person::Second if pov == Pov::Third => pov = Pov::Second,
                _ => {}
            }
            match info.number {
                Some(Number::Plural) => plural = true,
                Some(Number::Singular) => singular = true,
                None => {}
            }
            match info.gender {
                Gender::Masculine => masc = true,
                Gender::Feminine => fem = true,
                Gender::Unknown => {}
            }
        }
    }
    let number = if plural && !singular {
        Number::Plural
    } else {
        Number::Singular
    };
    let conflict = (masc && fem) || (plural && singular);
    let gender = match (masc, fem) {
        (true, false) => Gender::Masculine,
        (false, true) => Gender::Feminine,
        _ => Gender::Unknown,
    };
    (pov, number, gender, conflict)
}

/// Text covered by a token span: the source slice when offsets are usable, otherwise
/// the space-joined surfaces.
pub fn span_text(tokens: &[Token], source_text: &str, span: TokenSpan) -> String {
    let (Some(first), Some(last)) = (tokens.get(span.start), tokens.get(span.end)) else {
        return String::new();
    };
    let (start, end) = (first.char_span.0, last.char_span.1);
    if start < end {
        let text: String = source_text.chars().skip(start).take(end - start).collect();
        if text.chars().count() == end - start {
            return text;
        }
    }
    tokens[span.start..=span.end]
        .iter()
        .map(|t| t.surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Re-sorts a chain's mentions and recomputes strings and chain positions.
pub fn normalize_chain(tokens: &[Token], source_text: &str, chain: &mut CorefChain) {
    chain.mentions.sort_by_key(|m| (m.span.start, m.span.end));
    for (i, m) in chain.mentions.iter_mut().enumerate() {
        m.position_in_chain = i;
        if m.span.end < tokens.len() && m.span.start <= m.span.end {
            m.string = span_text(tokens, source_text, m.span);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntityRole {
    Focus,
    Confounder,
}

/// Input description of an entity whose mentions are rewritten.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub role: EntityRole,
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub given_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family_name: Option<String>,
}

impl EntitySpec {
    pub fn focus(gender: Gender) -> Self {
        EntitySpec {
            role: EntityRole::Focus,
            gender,
            full_name: None,
            given_name: None,
            family_name: None,
        }
    }

    /// Splits a full name into given and family parts ("Nick Flynn" -> Nick, Flynn).
    pub fn with_name(mut self, name: &str) -> Self {
        let parts: Vec<&str> = name.split_whitespace().collect();
        match parts.len() {
            0 => {}
            1 => self.given_name = Some(parts[0].to_owned()),
            _ => {
                self.full_name = Some(parts.join(" "));
                self.given_name = Some(parts[0].to_owned());
                self.family_name = Some(parts[parts.len() - 1].to_owned());
            }
        }
        self
    }

    /// Names in the order full, given, family, skipping absent ones and duplicates.
    pub fn names(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for name in [&self.full_name, &self.given_name, &self.family_name]
            .into_iter()
            .flatten()
        {
            if !out.contains(&name.as_str()) {
                out.push(name);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.role == EntityRole::Focus && self.gender == Gender::Unknown {
            return Err("focus entity requires a gender".into());
        }
        for (field, value) in [
            ("full_name", &self.full_name),
            ("given_name", &self.given_name),
            ("family_name", &self.family_name),
        ] {
            if let Some(v) = value {
                if v.trim().is_empty() {
                    return Err(format!("{field} must be non-empty when present"));
                }
            }
        }
        Ok(())
    }
}
