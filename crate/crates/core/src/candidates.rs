//! Candidate mention strings S(E) for focus and confounding entities, and case narrowing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::document::{CaseClass, ChainId, Document, Gender, Mention, Role};
use crate::error::{Error, Result};
use crate::preprocess::Confounders;
use crate::pronoun::{self, Person};
use crate::EntitySpec;

const BUILTIN_LEXICON: &str = include_str!("../data/relational_nouns.tsv");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateKind {
    ProperNp,
    Pronoun,
    CommonNp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateSource {
    Name,
    PronounInventory,
    PredicateNominal,
    Appositive,
    RelationalConverse,
    ChainString,
    CoordinatedRewrite,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub string: String,
    pub kind: CandidateKind,
    pub case_compat: Vec<CaseClass>,
    pub source: CandidateSource,
}

fn is_possessive_np(s: &str) -> bool {
    s.ends_with("'s") || s.ends_with("’s") || s.ends_with("s'") || s.ends_with("s’")
}

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "their", "its", "my", "our",
    "your", "some", "every", "each", "no",
];

/// Pronoun, proper name or common noun phrase, from the surface string alone.
pub fn kind_of(string: &str) -> CandidateKind {
    if pronoun::is_pronoun(string) {
        return CandidateKind::Pronoun;
    }
    let words: Vec<&str> = string.split_whitespace().collect();
    let proper = !words.is_empty()
        && !DETERMINERS.contains(&words[0].to_lowercase().as_str())
        && words
            .iter()
            .all(|w| w.chars().next().is_some_and(|c| c.is_uppercase() || !c.is_alphabetic()));
    if proper {
        CandidateKind::ProperNp
    } else {
        CandidateKind::CommonNp
    }
}

impl Candidate {
    pub fn new(string: impl Into<String>, source: CandidateSource) -> Self {
        let string = string.into();
        let kind = kind_of(&string);
        let case_compat = match pronoun::lookup(&string) {
            Some(info) => info.cases.to_vec(),
            None if is_possessive_np(&string) => vec![CaseClass::Possessive],
            None => vec![CaseClass::Nominative, CaseClass::Accusative],
        };
        Candidate {
            string,
            kind,
            case_compat,
            source,
        }
    }

    pub fn is_pronoun(&self) -> bool {
        self.kind == CandidateKind::Pronoun
    }

    fn order_key(&self) -> (CandidateKind, &str) {
        (self.kind, self.string.as_str())
    }
}

/// Sorts into canonical order (names, pronouns, noun phrases; each lexicographic) and
/// drops duplicate strings, keeping the first source seen.
pub fn canonicalize(mut cands: Vec<Candidate>) -> Vec<Candidate> {
    let mut seen = BTreeSet::new();
    cands.retain(|c| seen.insert(c.string.clone()));
    cands.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
    cands
}

/// Relational nouns with their converse by the gender of the other party.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RelationalLexicon {
    entries: BTreeMap<String, (String, String)>,
    masculine: BTreeSet<String>,
    feminine: BTreeSet<String>,
}

const MASCULINE_NOUNS: &[&str] = &[
    "dad", "daddy", "papa", "stepdad", "grandpa", "granddad", "grandad", "boy", "king", "prince",
    "fiance", "fiancé", "ex-husband", "ex-boyfriend", "butler", "landlord", "heir",
];
const FEMININE_NOUNS: &[&str] = &[
    "mom", "mum", "mommy", "mama", "stepmom", "grandma", "granny", "girl", "auntie", "queen",
    "princess", "fiancee", "fiancée", "ex-wife", "ex-girlfriend", "maid", "landlady", "heiress",
    "governess", "hostess", "mistress",
];

impl RelationalLexicon {
    pub fn builtin() -> Self {
        Self::from_tsv(BUILTIN_LEXICON).expect("shipped relational lexicon parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lex = RelationalLexicon::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 3 || cols[0].is_empty() {
                return Err(Error::parse(i + 1, "expected `noun<TAB>masculine<TAB>feminine`"));
            }
            if cols[1].is_empty() && cols[2].is_empty() {
                return Err(Error::parse(i + 1, format!("{} has no converse", cols[0])));
            }
            let (m, f) = (cols[1].to_lowercase(), cols[2].to_lowercase());
            let m = if m.is_empty() { f.clone() } else { m };
            let f = if f.is_empty() { m.clone() } else { f };
            if m != f {
                lex.masculine.insert(m.clone());
                lex.feminine.insert(f.clone());
            }
            lex.entries.insert(cols[0].to_lowercase(), (m, f));
        }
        for w in MASCULINE_NOUNS {
            lex.masculine.insert((*w).to_owned());
        }
        for w in FEMININE_NOUNS {
            lex.feminine.insert((*w).to_owned());
        }
        Ok(lex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key(&self, noun: &str) -> Option<String> {
        let lower = noun.to_lowercase();
        if self.entries.contains_key(&lower) {
            return Some(lower);
        }
        let singular = lower.strip_suffix('s')?;
        self.entries.contains_key(singular).then(|| singular.to_owned())
    }

    /// Converse noun when the other party has the given gender.
    pub fn converse(&self, noun: &str, gender: Gender) -> Option<&str> {
        let (m, f) = self.entries.get(&self.key(noun)?)?;
        match gender {
            Gender::Feminine => Some(f),
            _ => Some(m),
        }
    }

    /// Gender implied by the noun itself ("father" is masculine, "friend" is not).
    pub fn inherent_gender(&self, noun: &str) -> Gender {
        let Some(key) = self.key(noun) else {
            return Gender::Unknown;
        };
        match (self.masculine.contains(&key), self.feminine.contains(&key)) {
            (true, false) => Gender::Masculine,
            (false, true) => Gender::Feminine,
            _ => Gender::Unknown,
        }
    }
}

fn lower_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_lowercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Mention string as a candidate: pronouns and determiner-initial phrases lose
/// sentence-initial capitals.
pub fn candidate_string(doc: &Document, m: &Mention) -> String {
    let s = m.string.trim();
    if s == "I" {
        return s.to_owned();
    }
    let first_pos = doc.tokens.get(m.span.start).map(|t| t.pos.as_str()).unwrap_or("");
    if pronoun::is_pronoun(s) || matches!(first_pos, "DT" | "PRP$" | "PRP") {
        lower_first(s)
    } else {
        s.to_owned()
    }
}

fn is_be(tok: &crate::Token) -> bool {
    tok.lemma == "be"
        || matches!(
            tok.surface.to_lowercase().as_str(),
            "am" | "was" | "'m" | "’m" | "are" | "were" | "is" | "'re"
        )
}

fn is_nominal(pos: &str) -> bool {
    pos.starts_with("NN") && !pos.starts_with("NNP")
}

/// "a doctor" / "an old sailor" starting at `i`, rewritten with "the". Returns the end index.
fn indefinite_np(doc: &Document, i: usize) -> Option<(String, usize)> {
    let det = doc.tokens.get(i)?;
    let d = det.surface.to_lowercase();
    if !matches!(d.as_str(), "a" | "an" | "the") {
        return None;
    }
    let mut j = i + 1;
    let mut last_noun = None;
    while let Some(t) = doc.tokens.get(j) {
        if t.sentence_index != det.sentence_index {
            break;
        }
        if is_nominal(&t.pos) {
            last_noun = Some(j);
        } else if !(t.pos.starts_with("JJ") || t.pos == "HYPH") {
            break;
        }
        j += 1;
    }
    let end = last_noun?;
    let words: Vec<&str> = doc.tokens[i + 1..=end].iter().map(|t| t.surface.as_str()).collect();
    Some((format!("the {}", words.join(" ")), end))
}

fn predicate_nominals_and_appositives(doc: &Document, mentions: &[&Mention]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for m in mentions {
        let next = m.span.end + 1;
        let Some(tok) = doc.tokens.get(next) else { continue };
        if m.role == Role::Subject || m.case_class == CaseClass::Nominative {
            if is_be(tok) {
                if let Some((np, _)) = indefinite_np(doc, next + 1) {
                    out.push(Candidate::new(np, CandidateSource::PredicateNominal));
                }
            }
        }
        if tok.surface == "," {
            if let Some((np, end)) = indefinite_np(doc, next + 1) {
                let closes = doc
                    .tokens
                    .get(end + 1)
                    .is_some_and(|t| matches!(t.surface.as_str(), "," | "." | ";"));
                if closes {
                    out.push(Candidate::new(np, CandidateSource::Appositive));
                }
            }
        }
    }
    out
}

fn relational_converses(
    doc: &Document,
    focus: &ChainId,
    mentions: &[&Mention],
    focus_gender: Gender,
    lexicon: &RelationalLexicon,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    for m in mentions {
        let deictic_possessive = m.case_class == CaseClass::Possessive
            && m.pronoun().is_some_and(|p| p.person != Person::Third);
        if !deictic_possessive {
            continue;
        }
        let mut j = m.span.end + 1;
        while doc.tokens.get(j).is_some_and(|t| t.pos.starts_with("JJ")) {
            j += 1;
        }
        let Some(noun_tok) = doc.tokens.get(j) else { continue };
        let noun = noun_tok.surface.to_lowercase();
        let Some(converse) = lexicon.converse(&noun, focus_gender) else {
            continue;
        };
        let relative = doc.chains.iter().filter(|c| &c.chain_id != focus).find(|c| {
            c.mentions
                .iter()
                .any(|r| r.span.start <= m.span.start && r.span.contains(j))
        });
        let mut gender = relative.map_or(Gender::Unknown, |c| c.gender);
        if gender == Gender::Unknown {
            gender = lexicon.inherent_gender(&noun);
        }
        let possessors: &[&str] = match gender {
            Gender::Masculine => &["his"],
            Gender::Feminine => &["her"],
            Gender::Unknown => &["his", "her"],
        };
        for p in possessors {
            out.push(Candidate::new(
                format!("{p} {converse}"),
                CandidateSource::RelationalConverse,
            ));
        }
        if let Some(chain) = relative {
            for r in &chain.mentions {
                let is_name = !r.span.is_empty()
                    && (r.span.start..=r.span.end).all(|i| doc.tokens[i].is_proper_noun());
                if is_name && !r.in_quote {
                    out.push(Candidate::new(
                        format!("{}'s {converse}", r.string),
                        CandidateSource::RelationalConverse,
                    ));
                }
            }
        }
    }
    out
}

/// S(E) for the focus entity: names and their possessives, gendered pronouns,
/// predicate nominals, appositives and converse relational phrases.
pub fn build_focus_candidates(
    doc: &Document,
    focus: &ChainId,
    spec: &EntitySpec,
    lexicon: &RelationalLexicon,
) -> Result<Vec<Candidate>> {
    if spec.gender == Gender::Unknown {
        return Err(Error::Argument("focus entity requires a gender".into()));
    }
    spec.validate().map_err(Error::Argument)?;
    let chain = doc
        .chain(focus)
        .ok_or_else(|| Error::Argument(format!("no chain {focus}")))?;
    let mut out = Vec::new();
    for name in spec.names() {
        out.push(Candidate::new(name, CandidateSource::Name));
        out.push(Candidate::new(format!("{name}'s"), CandidateSource::Name));
    }
    for p in pronoun::gendered_inventory(spec.gender) {
        out.push(Candidate::new(*p, CandidateSource::PronounInventory));
    }
    let mentions: Vec<&Mention> = chain.mentions.iter().filter(|m| !m.in_quote).collect();
    out.extend(predicate_nominals_and_appositives(doc, &mentions));
    out.extend(relational_converses(doc, focus, &mentions, spec.gender, lexicon));
    Ok(canonicalize(out))
}

/// "Mandy and me" -> "Mandy and him" for a masculine focus.
fn coordinated_rewrite(string: &str, focus_gender: Gender) -> Option<String> {
    let words: Vec<&str> = string.split_whitespace().collect();
    if !words.iter().any(|w| w.eq_ignore_ascii_case("and")) {
        return None;
    }
    let has_name = words.iter().any(|w| {
        !pronoun::is_pronoun(w) && w.chars().next().is_some_and(char::is_uppercase)
    });
    if !has_name {
        return None;
    }
    let mut changed = false;
    let rewritten: Vec<String> = words
        .iter()
        .map(|w| match pronoun::lookup(w) {
            Some(info)
                if info.person != Person::Third && info.number != Some(crate::Number::Plural) =>
            {
                changed = true;
                pronoun::third_singular(focus_gender, info.cases[0])
                    .unwrap_or(w)
                    .to_owned()
            }
            _ => (*w).to_owned(),
        })
        .collect();
    changed.then(|| rewritten.join(" "))
}

/// S(E) for a confounder: its own unique strings, or for plural deictic chains the
/// third-person plural pronouns plus rewritten coordinations.
pub fn build_confounder_candidates(
    doc: &Document,
    chain: &ChainId,
    confounders: &Confounders,
    focus_gender: Gender,
) -> Vec<Candidate> {
    let Some(c) = doc.chain(chain) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    if confounders.plural.contains(chain) {
        for p in pronoun::PLURAL_INVENTORY {
            out.push(Candidate::new(p, CandidateSource::PronounInventory));
        }
        for m in c.mentions.iter().filter(|m| !m.in_quote) {
            if let Some(s) = coordinated_rewrite(&m.string, focus_gender) {
                out.push(Candidate::new(s, CandidateSource::CoordinatedRewrite));
            }
        }
    } else {
        let mut mentions: Vec<&Mention> = c.mentions.iter().filter(|m| !m.in_quote).collect();
        if mentions.is_empty() {
            mentions = c.mentions.iter().collect();
        }
        for m in mentions {
            out.push(Candidate::new(candidate_string(doc, m), CandidateSource::ChainString));
        }
    }
    canonicalize(out)
}

/// Case class an original mention occupies; non-pronominal mentions use form and role.
pub fn slot_case(original: &Mention) -> CaseClass {
    match original.case_class {
        CaseClass::NonPronominal => {
            if is_possessive_np(&original.string) {
                CaseClass::Possessive
            } else if original.role == Role::Subject {
                CaseClass::Nominative
            } else {
                CaseClass::Accusative
            }
        }
        c => c,
    }
}

pub fn case_fits(c: &Candidate, case: CaseClass) -> bool {
    case == CaseClass::NonPronominal || c.case_compat.contains(&case)
}

/// Candidates fitting the original mention's case. Returns the full set and `true`
/// when nothing fits.
pub fn narrow_by_case(candidates: &[Candidate], original: &Mention) -> (Vec<Candidate>, bool) {
    let case = slot_case(original);
    let narrowed: Vec<Candidate> = candidates
        .iter()
        .filter(|c| case_fits(c, case))
        .cloned()
        .collect();
    if narrowed.is_empty() && !candidates.is_empty() {
        warn!(
            "no candidate fits the {case:?} slot of {:?}; keeping all {}",
            original.string,
            candidates.len()
        );
        return (candidates.to_vec(), true);
    }
    (narrowed, false)
}

pub fn strings(cands: &[Candidate]) -> Vec<&str> {
    cands.iter().map(|c| c.string.as_str()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mention(s: &str, case: CaseClass, role: Role) -> Mention {
        Mention {
            chain_id: ChainId::from("1"),
            span: crate::TokenSpan::single(0),
            string: s.into(),
            case_class: case,
            role,
            in_quote: false,
            narrator: false,
            position_in_chain: 0,
        }
    }

    #[test]
    fn canonical_order() {
        let c = canonicalize(vec![
            Candidate::new("his son", CandidateSource::RelationalConverse),
            Candidate::new("he", CandidateSource::PronounInventory),
            Candidate::new("Nick", CandidateSource::Name),
            Candidate::new("Nick", CandidateSource::ChainString),
        ]);
        assert_eq!(strings(&c), ["Nick", "he", "his son"]);
        assert_eq!(c[0].source, CandidateSource::Name);
    }

    #[test]
    fn lexicon_genders() {
        let lex = RelationalLexicon::builtin();
        assert!(lex.len() >= 150);
        assert_eq!(lex.inherent_gender("father"), Gender::Masculine);
        assert_eq!(lex.inherent_gender("sister"), Gender::Feminine);
        assert_eq!(lex.inherent_gender("friend"), Gender::Unknown);
        assert_eq!(lex.converse("sister", Gender::Masculine), Some("brother"));
        assert_eq!(lex.converse("parents", Gender::Feminine), Some("daughter"));
    }

    #[test]
    fn coordination() {
        assert_eq!(
            coordinated_rewrite("Mandy and me", Gender::Masculine).as_deref(),
            Some("Mandy and him")
        );
        assert_eq!(
            coordinated_rewrite("Mandy and I", Gender::Feminine).as_deref(),
            Some("Mandy and she")
        );
        assert_eq!(coordinated_rewrite("you and me", Gender::Feminine), None);
    }

    #[test]
    fn narrowing_fallback() {
        let cands = vec![Candidate::new("Phil", CandidateSource::ChainString)];
        let (out, fell_back) = narrow_by_case(&cands, &mention("myself", CaseClass::Reflexive, Role::Object));
        assert!(fell_back);
        assert_eq!(strings(&out), ["Phil"]);
    }

    #[test]
    fn noun_slots() {
        let cands = canonicalize(vec![
            Candidate::new("Phil", CandidateSource::ChainString),
            Candidate::new("Phil's", CandidateSource::ChainString),
            Candidate::new("his", CandidateSource::ChainString),
        ]);
        let (out, _) = narrow_by_case(&cands, &mention("Phil", CaseClass::NonPronominal, Role::Subject));
        assert_eq!(strings(&out), ["Phil"]);
        let (out, _) = narrow_by_case(&cands, &mention("Phil's", CaseClass::NonPronominal, Role::Other));
        assert_eq!(strings(&out), ["Phil's", "his"]);
    }
}
