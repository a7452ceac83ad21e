//! Subject-verb agreement: finding verbs governed by focus mentions and
//! re-conjugating them to third person singular.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::document::{ChainId, Document};
use crate::error::{Error, Result};

const BUILTIN_DICTIONARY: &str = include_str!("../data/verbs.tsv");
const BUILTIN_RULES: &str = include_str!("../data/agreement_rules.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tense {
    Present,
    Past,
    ThirdSingular,
}

impl Tense {
    /// Tense from a Penn Treebank verb tag.
    pub fn from_pos(pos: &str) -> Tense {
        match pos {
            "VBD" | "VBN" => Tense::Past,
            "VBZ" => Tense::ThirdSingular,
            _ => Tense::Present,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleUsed {
    Dictionary,
    Irregular,
    SuffixRule,
    Unchanged,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbEdit {
    pub token_index: usize,
    pub original_form: String,
    pub new_form: String,
    pub rule_used: RuleUsed,
}

impl VerbEdit {
    pub fn changes(&self) -> bool {
        self.new_form != self.original_form
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct DictEntry {
    base: String,
    third_singular: String,
}

/// Conjugation dictionary: `lemma<TAB>base<TAB>third_singular<TAB>past`.
#[derive(Clone, Debug, Default)]
pub struct VerbDictionary {
    by_lemma: HashMap<String, DictEntry>,
    by_base: HashMap<String, String>,
    third_forms: HashSet<String>,
}

impl VerbDictionary {
    pub fn builtin() -> Self {
        Self::from_tsv(BUILTIN_DICTIONARY).expect("shipped verb dictionary parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_tsv(&std::fs::read_to_string(path)?)
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut dict = VerbDictionary::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 || cols.iter().any(|c| c.is_empty()) {
                return Err(Error::parse(
                    i + 1,
                    format!("expected 4 tab-separated columns, found {}", cols.len()),
                ));
            }
            let entry = DictEntry {
                base: cols[1].to_lowercase(),
                third_singular: cols[2].to_lowercase(),
            };
            dict.third_forms.insert(entry.third_singular.clone());
            dict.by_base
                .insert(entry.base.clone(), entry.third_singular.clone());
            dict.by_lemma.insert(cols[0].to_lowercase(), entry);
        }
        Ok(dict)
    }

    pub fn len(&self) -> usize {
        self.by_lemma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_lemma.is_empty()
    }

    fn lookup(&self, lemma: &str, form: &str) -> Option<&str> {
        if let Some(e) = self.by_lemma.get(lemma) {
            if e.base == form || e.third_singular == form || lemma == form {
                return Some(&e.third_singular);
            }
        }
        self.by_base.get(form).map(String::as_str)
    }
}

/// Forms handled by the embedded table: "be", "have", "do", modals and clitics.
fn irregular(form: &str) -> Option<&'static str> {
    Some(match form {
        "am" | "are" | "is" => "is",
        "were" | "was" => "was",
        "'m" | "'re" | "'s" => "'s",
        "’m" | "’re" | "’s" => "’s",
        "'ve" => "'s",
        "’ve" => "’s",
        "'d" => "'d",
        "’d" => "’d",
        "'ll" => "'ll",
        "’ll" => "’ll",
        "have" | "has" => "has",
        "do" | "does" => "does",
        "can" | "could" | "will" | "would" | "shall" | "should" | "may" | "might" | "must"
        | "ought" | "ca" | "wo" | "sha" => return Some(modal(form)),
        _ => return None,
    })
}

fn modal(form: &str) -> &'static str {
    match form {
        "can" => "can",
        "could" => "could",
        "will" => "will",
        "would" => "would",
        "shall" => "shall",
        "should" => "should",
        "may" => "may",
        "might" => "might",
        "must" => "must",
        "ought" => "ought",
        "ca" => "ca",
        "wo" => "wo",
        _ => "sha",
    }
}

fn is_be_form(form: &str) -> bool {
    matches!(
        form,
        "am" | "are" | "is" | "were" | "was" | "'m" | "'re" | "’m" | "’re"
    )
}

/// Suffix rules: +es after s/sh/ch/x/z/o, consonant+y -> ies, otherwise +s.
pub fn suffix_rule(base: &str) -> String {
    if base.ends_with("sh")
        || base.ends_with("ch")
        || base.ends_with('s')
        || base.ends_with('x')
        || base.ends_with('z')
        || base.ends_with('o')
    {
        return format!("{base}es");
    }
    let chars: Vec<char> = base.chars().collect();
    if chars.len() >= 2 && chars[chars.len() - 1] == 'y' && !"aeiou".contains(chars[chars.len() - 2])
    {
        return format!("{}ies", &base[..base.len() - 1]);
    }
    format!("{base}s")
}

fn match_case(template: &str, word: &str) -> String {
    let mut chars = template.chars();
    match chars.next() {
        Some(c) if c.is_uppercase() => {
            if template.chars().count() > 1 && template.chars().all(|c| !c.is_lowercase()) {
                word.to_uppercase()
            } else {
                let mut w = word.chars();
                match w.next() {
                    Some(f) => f.to_uppercase().chain(w).collect(),
                    None => String::new(),
                }
            }
        }
        _ => word.to_owned(),
    }
}

#[derive(Clone, Debug)]
pub struct Conjugator {
    dictionary: VerbDictionary,
}

impl Default for Conjugator {
    fn default() -> Self {
        Conjugator {
            dictionary: VerbDictionary::builtin(),
        }
    }
}

impl Conjugator {
    pub fn new(dictionary: VerbDictionary) -> Self {
        Conjugator { dictionary }
    }

    /// Third-person singular form of a verb agreeing with a first or second person subject.
    pub fn conjugate(&self, form: &str, lemma: &str, tense: Tense) -> Result<(String, RuleUsed)> {
        if form.trim().is_empty() {
            return Err(Error::Argument("cannot conjugate an empty verb form".into()));
        }
        let lower = form.to_lowercase();
        let lemma = lemma.trim().to_lowercase();
        let lemma = if lemma.is_empty() || lemma == "_" || lemma == "-" {
            lower.clone()
        } else {
            lemma
        };
        let finish = |target: &str, rule: RuleUsed| {
            if target == lower {
                (form.to_owned(), RuleUsed::Unchanged)
            } else {
                (match_case(form, target), rule)
            }
        };

        if is_be_form(&lower) || irregular(&lower).is_some() && lemma != lower && is_modal(&lower)
        {
            let target = irregular(&lower).unwrap_or(&lower);
            return Ok(finish(target, RuleUsed::Irregular));
        }
        if tense == Tense::Past {
            return Ok((form.to_owned(), RuleUsed::Unchanged));
        }
        if tense == Tense::ThirdSingular || self.dictionary.third_forms.contains(&lower) {
            return Ok((form.to_owned(), RuleUsed::Unchanged));
        }
        if let Some(target) = self.dictionary.lookup(&lemma, &lower) {
            return Ok(finish(target, RuleUsed::Dictionary));
        }
        if let Some(target) = irregular(&lower) {
            return Ok(finish(target, RuleUsed::Irregular));
        }
        let base = if lower.starts_with(&lemma) || lemma.len() + 3 < lower.len() {
            lemma.as_str()
        } else {
            lower.as_str()
        };
        let target = suffix_rule(base);
        if target == lower || suffix_rule(&lemma) == lower {
            return Ok((form.to_owned(), RuleUsed::Unchanged));
        }
        Ok(finish(&target, RuleUsed::SuffixRule))
    }
}

fn is_modal(form: &str) -> bool {
    matches!(
        form,
        "can" | "could" | "will" | "would" | "shall" | "should" | "may" | "might" | "must"
            | "ought" | "ca" | "wo" | "sha" | "'ll" | "’ll" | "'d" | "’d" | "'ve" | "’ve"
    )
}

/// Conjugates with the shipped dictionary and tables.
pub fn conjugate_third_singular(form: &str, lemma: &str, tense: Tense) -> Result<String> {
    thread_local! {
        static DEFAULT: Conjugator = Conjugator::default();
    }
    DEFAULT.with(|c| c.conjugate(form, lemma, tense).map(|(f, _)| f))
}

/// Dependency labels for subject, auxiliary and conjunct relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgreementRules {
    pub subject: Vec<String>,
    pub auxiliary: Vec<String>,
    pub conjunct: Vec<String>,
}

impl Default for AgreementRules {
    fn default() -> Self {
        Self::parse(BUILTIN_RULES).expect("shipped agreement rules parse")
    }
}

impl AgreementRules {
    pub fn parse(text: &str) -> Result<Self> {
        let mut rules = AgreementRules {
            subject: Vec::new(),
            auxiliary: Vec::new(),
            conjunct: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(kind), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::parse(i + 1, "expected `<kind> <label>`"));
            };
            let target = match kind {
                "subject" => &mut rules.subject,
                "auxiliary" => &mut rules.auxiliary,
                "conjunct" => &mut rules.conjunct,
                other => return Err(Error::parse(i + 1, format!("unknown rule kind {other}"))),
            };
            target.push(label.to_owned());
        }
        Ok(rules)
    }

    fn is(&self, list: &[String], label: &str) -> bool {
        list.iter().any(|l| l == label)
    }
}

/// Finite verbs (or auxiliaries) whose subject lies inside an editable focus mention.
pub fn find_agreement_verbs(doc: &Document, focus: &ChainId, rules: &AgreementRules) -> Vec<usize> {
    let Some(chain) = doc.chain(focus) else {
        return Vec::new();
    };
    let spans: Vec<_> = chain.active_mentions().map(|m| m.span).collect();
    let mut children: HashMap<usize, Vec<(usize, &str)>> = HashMap::new();
    let mut has_subject: HashSet<usize> = HashSet::new();
    for arc in &doc.dependencies {
        children
            .entry(arc.head)
            .or_default()
            .push((arc.dependent, arc.label.as_str()));
        if rules.is(&rules.subject, &arc.label) {
            has_subject.insert(arc.head);
        }
    }
    let finite_of = |head: usize| -> Option<usize> {
        let mut group = vec![head];
        if let Some(kids) = children.get(&head) {
            group.extend(
                kids.iter()
                    .filter(|(_, l)| rules.is(&rules.auxiliary, l))
                    .map(|(d, _)| *d),
            );
        }
        group.sort_unstable();
        group
            .into_iter()
            .find(|&i| doc.tokens.get(i).is_some_and(|t| t.is_finite_verb()))
    };

    let mut out = BTreeSet::new();
    for arc in &doc.dependencies {
        if !rules.is(&rules.subject, &arc.label) {
            continue;
        }
        let Some(span) = spans.iter().find(|s| s.contains(arc.dependent)) else {
            continue;
        };
        if span.contains(arc.head) {
            continue;
        }
        let mut heads = vec![arc.head];
        if let Some(kids) = children.get(&arc.head) {
            heads.extend(
                kids.iter()
                    .filter(|(d, l)| rules.is(&rules.conjunct, l) && !has_subject.contains(d))
                    .filter(|(d, _)| doc.tokens.get(*d).is_some_and(|t| t.is_verb()))
                    .map(|(d, _)| *d),
            );
        }
        for h in heads {
            if let Some(v) = finite_of(h) {
                if !doc.in_quotes(v) {
                    out.insert(v);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Verb edits for every agreement verb of the focus chain.
pub fn plan_verb_edits(
    doc: &Document,
    focus: &ChainId,
    rules: &AgreementRules,
    conjugator: &Conjugator,
) -> Result<Vec<VerbEdit>> {
    find_agreement_verbs(doc, focus, rules)
        .into_iter()
        .map(|i| {
            let tok = &doc.tokens[i];
            let (new_form, rule_used) =
                conjugator.conjugate(&tok.surface, &tok.lemma, Tense::from_pos(&tok.pos))?;
            Ok(VerbEdit {
                token_index: i,
                original_form: tok.surface.clone(),
                new_form,
                rule_used,
            })
        })
        .collect()
}
