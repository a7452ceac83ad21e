//! Generator of small first-person documents with gold third-person conversions.
//!
//! Each document has a focus narrator, a second character of the same gender (who
//! becomes a confounder once the narrator turns third person) and a character of the
//! other gender. Gold strings follow fixed rules: a chain's first mention is the
//! full name of the focus or the given name of anyone else; a subject of the focus
//! in a sentence opening with "Meanwhile ," is the family name; a nominative or
//! accusative mention right after a mention of a different person of the same gender
//! is the given name; everything else is a pronoun. Filler sentences without person
//! mentions push earlier mentions out of the token window.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::document::{CaseClass, ChainId, DependencyArc, Gender, Pov, TokenSpan};
use crate::error::Result;
use crate::format::{ChainRecord, DocumentRecord, FocusRecord, GoldReplacement, GoldVerbChange, MentionRecord, TokenRecord, SCHEMA_VERSION};
use crate::ingest::{load_pov_document, PovDocument};

const MALE_GIVEN: &[&str] = &["Nick", "Phil", "Tom", "Sam", "Jack", "Ben", "Paul", "Mark", "Luke", "Adam", "Owen", "Carl"];
const FEMALE_GIVEN: &[&str] = &["Emily", "Anna", "Kate", "Laura", "Mia", "Nora", "Sara", "Jane", "Ruth", "Lucy", "Ella", "Rose"];
const FAMILY: &[&str] = &["Flynn", "Carter", "Hayes", "Moore", "Reid", "Walsh", "Grant", "Lowe", "Price", "Shaw"];
const KIN: &[&str] = &["father", "mother", "brother", "sister", "grandfather", "grandmother", "uncle", "aunt", "son", "daughter"];

/// `(lemma, first person present, third person present, past)`
const VERBS: &[(&str, &str, &str, &str)] = &[
    ("drive", "drive", "drives", "drove"),
    ("return", "return", "returns", "returned"),
    ("call", "call", "calls", "called"),
    ("meet", "meet", "meets", "met"),
    ("tell", "tell", "tells", "told"),
    ("blame", "blame", "blames", "blamed"),
    ("raise", "raise", "raise", "raised"),
    ("visit", "visit", "visits", "visited"),
    ("wait", "wait", "waits", "waited"),
    ("work", "work", "works", "worked"),
    ("walk", "walk", "walks", "walked"),
    ("thank", "thank", "thanks", "thanked"),
    ("be", "am", "is", "was"),
    ("hear", "hear", "hears", "heard"),
    ("ask", "ask", "asks", "asked"),
    ("live", "live", "lives", "lived"),
    ("see", "see", "sees", "saw"),
    ("follow", "follow", "follows", "followed"),
    ("watch", "watch", "watches", "watched"),
];

const OPENING: &[&str] = &[
    "S:a V:return to Boston , to P:a job .",
    "S:a V:live near the old harbor with P:a dog .",
];

/// Templates: `S:x` subject, `O:x` object, `P:x` possessive, `R:x` reflexive,
/// `REL:x` possessive plus kinship noun, `V:lemma` verb agreeing with the subject,
/// `V2:lemma` conjoined verb sharing it, `VD:lemma` past verb, `W:lemma` infinitive.
const TEMPLATES: &[&str] = &[
    "S:a V:drive to the city every other week , to W:work a night or two at Pine Street , to W:see O:b .",
    "S:a V:return to Boston , to P:a job .",
    "S:a V:call O:b after dinner .",
    "S:a V:meet O:b at the station .",
    "S:a V:tell O:b about P:a plans .",
    "S:a V:blame R:a for the mistake .",
    "REL:a and REL:a VD:raise O:a with REL:a and REL:a .",
    "S:a V:visit REL:b in the spring .",
    "Meanwhile , S:a V:wait for O:b at the office .",
    "S:a V:work late and V2:walk home with O:b .",
    "S:a V:thank O:b for P:b help .",
    "S:a V:be tired of the noise in P:a street .",
    "REL:a V:visit O:a in the spring .",
    "S:a V:hear P:b voice from the kitchen .",
    "S:a V:ask O:b about the letter .",
    "Meanwhile , S:a V:follow O:b to the market .",
    "S:a V:watch O:b from the window .",
];

const FILLERS: &[&str] = &[
    "The rain kept falling over the old harbor , and the streets stayed empty until late in the evening .",
    "A cold wind came down from the hills and rattled every window along the narrow road by the river .",
    "The bus was late again , and the small station filled slowly with tired workers and their heavy bags .",
    "Nobody in the building could remember a winter as long and as quiet as that one had been .",
    "The market opened at dawn , and the smell of bread and coffee drifted across the square for hours .",
    "Snow covered the roofs of the town , and the lamps along the bridge burned until the morning came .",
    "The old radio in the kitchen played the same songs every night while the kettle boiled on the stove .",
    "Trains rolled past the yard every hour , shaking the glass in the frames of the tall grey houses .",
];

#[derive(Clone, Debug)]
struct Person {
    given: String,
    family: Option<String>,
    gender: Gender,
    focus: bool,
}

impl Person {
    fn full(&self) -> String {
        match &self.family {
            Some(f) => format!("{} {f}", self.given),
            None => self.given.clone(),
        }
    }
}

fn pronoun(gender: Gender, case: CaseClass) -> &'static str {
    let fem = gender == Gender::Feminine;
    match case {
        CaseClass::Nominative => if fem { "she" } else { "he" },
        CaseClass::Accusative => if fem { "her" } else { "him" },
        CaseClass::Possessive => if fem { "her" } else { "his" },
        _ => if fem { "herself" } else { "himself" },
    }
}

fn first_person(case: CaseClass) -> &'static str {
    match case {
        CaseClass::Nominative => "I",
        CaseClass::Accusative => "me",
        CaseClass::Possessive => "my",
        _ => "myself",
    }
}

fn pos_of(word: &str) -> &'static str {
    match word.to_lowercase().as_str() {
        "the" | "a" | "an" | "every" => "DT",
        "to" | "at" | "with" | "about" | "for" | "near" | "in" | "on" | "after" | "of" | "from" | "over"
        | "until" | "by" | "across" | "along" | "past" | "down" => "IN",
        "and" | "or" => "CC",
        "meanwhile" | "late" | "home" | "again" | "slowly" | "as" => "RB",
        "other" | "old" | "tired" | "empty" | "quiet" | "long" | "cold" | "small" | "narrow" | "heavy" | "tall"
        | "grey" | "same" => "JJ",
        "two" => "CD",
        "," => ",",
        "." => ".",
        "'s" => "POS",
        w if w.ends_with("ed") || matches!(w, "kept" | "came" | "was" | "could" | "had" | "been" | "played" | "burned") => "VBD",
        _ => {
            if word.chars().next().is_some_and(char::is_uppercase) {
                "NNP"
            } else {
                "NN"
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Subject {
    Entity(usize),
    Third,
}

struct Builder {
    people: Vec<Person>,
    text: String,
    tokens: Vec<TokenRecord>,
    sentences: Vec<TokenSpan>,
    deps: Vec<DependencyArc>,
    mentions: Vec<Vec<(TokenSpan, String)>>,
    verb_changes: Vec<GoldVerbChange>,
    gold_prev: Option<usize>,
    src_prev: Option<usize>,
    seen: Vec<bool>,
    present: bool,
}

impl Builder {
    fn new(people: Vec<Person>) -> Self {
        let n = people.len();
        Builder {
            people,
            text: String::new(),
            tokens: Vec::new(),
            sentences: Vec::new(),
            deps: Vec::new(),
            mentions: vec![Vec::new(); n],
            verb_changes: Vec::new(),
            gold_prev: None,
            src_prev: None,
            seen: vec![false; n],
            present: true,
        }
    }

    fn push(&mut self, surface: &str, pos: &str, lemma: &str) -> usize {
        let attach = matches!(surface, "," | "." | "'s") || self.text.is_empty();
        if !attach {
            self.text.push(' ');
        }
        let start = self.text.chars().count();
        self.text.push_str(surface);
        self.tokens.push(TokenRecord {
            surface: surface.to_owned(),
            pos: pos.to_owned(),
            lemma: lemma.to_owned(),
            char_start: start,
            char_end: start + surface.chars().count(),
        });
        self.tokens.len() - 1
    }

    fn push_word(&mut self, word: &str, sentence_start: bool) -> usize {
        let surface = if sentence_start { crate::context::capitalize(word) } else { word.to_owned() };
        self.push(&surface, pos_of(word), &word.to_lowercase())
    }

    fn ambiguous(&self, prev: Option<usize>, e: usize, source: bool) -> bool {
        prev.is_some_and(|p| {
            p != e && self.people[p].gender == self.people[e].gender && !(source && self.people[p].focus)
        })
    }

    fn gold_string(&self, e: usize, case: CaseClass, meanwhile: bool) -> String {
        let p = &self.people[e];
        let poss = case == CaseClass::Possessive;
        if case == CaseClass::Reflexive {
            return pronoun(p.gender, case).into();
        }
        let name = |n: String| if poss { format!("{n}'s") } else { n };
        if !self.seen[e] {
            return name(if p.focus { p.full() } else { p.given.clone() });
        }
        if meanwhile && p.focus && case == CaseClass::Nominative {
            if let Some(f) = &p.family {
                return f.clone();
            }
        }
        if !poss && self.ambiguous(self.gold_prev, e, false) {
            return p.given.clone();
        }
        pronoun(p.gender, case).into()
    }

    fn source_string(&self, e: usize, case: CaseClass) -> String {
        let p = &self.people[e];
        if p.focus {
            return first_person(case).into();
        }
        if case == CaseClass::Reflexive {
            return pronoun(p.gender, case).into();
        }
        if self.mentions[e].is_empty() {
            return if case == CaseClass::Possessive { format!("{}'s", p.given) } else { p.given.clone() };
        }
        if case != CaseClass::Possessive && self.ambiguous(self.src_prev, e, true) {
            return p.given.clone();
        }
        pronoun(p.gender, case).into()
    }

    /// Emits a mention; returns its head token.
    fn mention(&mut self, e: usize, case: CaseClass, meanwhile: bool, sentence_start: bool) -> usize {
        let gold = self.gold_string(e, case, meanwhile);
        let src = self.source_string(e, case);
        let start = self.tokens.len();
        let words: Vec<String> = crate::context::tokenize_string(&src);
        let mut head = start;
        for (i, w) in words.iter().enumerate() {
            let pronominal = crate::pronoun::is_pronoun(w);
            let pos = if w == "'s" {
                "POS"
            } else if pronominal {
                if case == CaseClass::Possessive { "PRP$" } else { "PRP" }
            } else {
                "NNP"
            };
            let surface = if i == 0 && sentence_start { crate::context::capitalize(w) } else { w.clone() };
            let idx = self.push(&surface, pos, &w.to_lowercase());
            if w != "'s" {
                head = idx;
            }
        }
        let span = TokenSpan::new(start, self.tokens.len() - 1);
        self.mentions[e].push((span, gold));
        self.seen[e] = true;
        self.gold_prev = Some(e);
        self.src_prev = Some(e);
        head
    }

    fn verb(&mut self, lemma: &str, subject: Option<Subject>, past: bool, infinitive: bool) -> usize {
        let &(_, base, third, past_form) = VERBS.iter().find(|v| v.0 == lemma).expect("template verb is listed");
        let focus_subject = matches!(subject, Some(Subject::Entity(e)) if self.people[e].focus);
        let (form, pos) = if infinitive {
            (if lemma == "be" { "be" } else { base }, "VB")
        } else if past {
            (if lemma == "be" && focus_subject { "was" } else { past_form }, "VBD")
        } else if focus_subject {
            (base, "VBP")
        } else {
            (third, "VBZ")
        };
        let idx = self.push(form, pos, lemma);
        if focus_subject && !past && !infinitive && form != third {
            self.verb_changes.push(GoldVerbChange { token: idx, string: third.to_owned() });
        }
        idx
    }

    fn sentence(&mut self, template: &str, vars: &[usize], kin: &mut dyn FnMut() -> &'static str) {
        let start = self.tokens.len();
        let meanwhile = template.starts_with("Meanwhile");
        let past = !self.present;
        let mut subject: Option<Subject> = None;
        let mut subject_head: Option<usize> = None;
        let mut last_verb: Option<usize> = None;
        let mut first_verb: Option<usize> = None;
        for item in template.split_whitespace() {
            let at_start = self.tokens.len() == start;
            let var = |s: &str| vars[(s.as_bytes()[0] - b'a') as usize];
            if let Some(x) = item.strip_prefix("S:") {
                let e = var(x);
                subject_head = Some(self.mention(e, CaseClass::Nominative, meanwhile, at_start));
                subject = Some(Subject::Entity(e));
            } else if let Some(x) = item.strip_prefix("O:") {
                let h = self.mention(var(x), CaseClass::Accusative, false, at_start);
                if let Some(v) = last_verb {
                    self.deps.push(DependencyArc { head: v, dependent: h, label: "obj".into() });
                }
            } else if let Some(x) = item.strip_prefix("R:") {
                let h = self.mention(var(x), CaseClass::Reflexive, false, at_start);
                if let Some(v) = last_verb {
                    self.deps.push(DependencyArc { head: v, dependent: h, label: "obj".into() });
                }
            } else if let Some(x) = item.strip_prefix("P:") {
                let h = self.mention(var(x), CaseClass::Possessive, false, at_start);
                self.deps.push(DependencyArc { head: h + 1, dependent: h, label: "nmod:poss".into() });
            } else if let Some(x) = item.strip_prefix("REL:") {
                let h = self.mention(var(x), CaseClass::Possessive, false, at_start);
                let kin = kin();
                let noun = self.push(kin, "NN", kin);
                self.deps.push(DependencyArc { head: noun, dependent: h, label: "nmod:poss".into() });
                if subject.is_none() && last_verb.is_none() {
                    subject = Some(Subject::Third);
                    subject_head = Some(noun);
                }
            } else if let Some(l) = item.strip_prefix("V2:") {
                let v = self.verb(l, subject, past, false);
                if let Some(f) = first_verb {
                    self.deps.push(DependencyArc { head: f, dependent: v, label: "conj".into() });
                }
                last_verb = Some(v);
            } else if let Some(l) = item.strip_prefix("VD:") {
                let v = self.verb(l, Some(Subject::Third), true, false);
                if let Some(h) = subject_head {
                    self.deps.push(DependencyArc { head: v, dependent: h, label: "nsubj".into() });
                }
                first_verb = first_verb.or(Some(v));
                last_verb = Some(v);
            } else if let Some(l) = item.strip_prefix("V:") {
                let v = self.verb(l, subject, past, false);
                if let Some(h) = subject_head {
                    self.deps.push(DependencyArc { head: v, dependent: h, label: "nsubj".into() });
                }
                first_verb = first_verb.or(Some(v));
                last_verb = Some(v);
            } else if let Some(l) = item.strip_prefix("W:") {
                last_verb = Some(self.verb(l, None, false, true));
            } else {
                self.push_word(item, at_start);
            }
        }
        self.sentences.push(TokenSpan::new(start, self.tokens.len() - 1));
    }

    fn filler(&mut self, text: &str) {
        let start = self.tokens.len();
        for w in text.split_whitespace() {
            self.push(w, pos_of(w), &w.to_lowercase());
        }
        self.sentences.push(TokenSpan::new(start, self.tokens.len() - 1));
    }

    fn finish(self, doc_id: &str, focus: usize, confounder: usize) -> Result<PovDocument> {
        let mut chains = Vec::new();
        let mut gold = Vec::new();
        for (e, ms) in self.mentions.iter().enumerate() {
            if ms.is_empty() {
                continue;
            }
            let id = ChainId::new(format!("{}", e + 1));
            chains.push(ChainRecord {
                chain_id: id.clone(),
                entity_kind: None,
                pov: None,
                number: None,
                gender: None,
                mentions: ms
                    .iter()
                    .map(|(span, _)| MentionRecord { span: *span, case: None, role: None, in_quote: None, narrator: false })
                    .collect(),
            });
            if e == focus || e == confounder {
                for (span, string) in ms {
                    gold.push(GoldReplacement { chain_id: id.clone(), span: *span, string: string.clone() });
                }
            }
        }
        let p = &self.people[focus];
        let record = DocumentRecord {
            schema_version: SCHEMA_VERSION,
            doc_id: doc_id.to_owned(),
            genre: "synthetic".into(),
            text: self.text,
            tokens: self.tokens,
            sentences: self.sentences,
            chains,
            quoted_spans: Vec::new(),
            dependencies: self.deps,
            focus: Some(FocusRecord {
                gender: p.gender,
                full_name: Some(p.full()),
                given_name: Some(p.given.clone()),
                family_name: p.family.clone(),
                from_pov: Pov::First,
            }),
            gold_replacements: gold,
            gold_verb_changes: self.verb_changes,
        };
        let json = serde_json::to_string(&record).expect("records serialize");
        load_pov_document(&json)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub seed: u64,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Chance of a run of filler sentences before each content sentence.
    pub filler_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { num_docs: 20, seed: 7, min_sentences: 8, max_sentences: 12, filler_rate: 0.3 }
    }
}

fn cast(rng: &mut ChaCha8Rng) -> Vec<Person> {
    let focus_gender = if rng.gen_bool(0.75) { Gender::Masculine } else { Gender::Feminine };
    let (same, other) = match focus_gender {
        Gender::Feminine => (FEMALE_GIVEN, MALE_GIVEN),
        _ => (MALE_GIVEN, FEMALE_GIVEN),
    };
    let mut same_names: Vec<&str> = same.choose_multiple(rng, 2).copied().collect();
    same_names.shuffle(rng);
    let other_gender = if focus_gender == Gender::Masculine { Gender::Feminine } else { Gender::Masculine };
    vec![
        Person {
            given: same_names[0].into(),
            family: Some((*FAMILY.choose(rng).expect("names")).into()),
            gender: focus_gender,
            focus: true,
        },
        Person { given: same_names[1].into(), family: None, gender: focus_gender, focus: false },
        Person { given: (*other.choose(rng).expect("names")).into(), family: None, gender: other_gender, focus: false },
    ]
}

/// One generated document.
pub fn generate_document(doc_id: &str, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<PovDocument> {
    let people = cast(rng);
    let mut b = Builder::new(people);
    b.present = rng.gen_bool(0.8);
    let opening = OPENING.choose(rng).expect("templates");
    let mut kin_rng = ChaCha8Rng::seed_from_u64(rng.gen());
    let mut kin = move || *KIN.choose(&mut kin_rng).expect("kin list is not empty");
    b.sentence(opening, &[1], &mut kin);
    let n = rng.gen_range(config.min_sentences..=config.max_sentences);
    for _ in 0..n {
        if rng.gen_bool(config.filler_rate) {
            for _ in 0..rng.gen_range(1..=3) {
                b.filler(FILLERS.choose(rng).expect("fillers"));
            }
        }
        let template = TEMPLATES.choose(rng).expect("templates");
        let a = match rng.gen_range(0..10) {
            0..=4 => 0,
            5..=7 => 1,
            _ => 2,
        };
        let others: Vec<usize> = (0..3).filter(|x| *x != a).collect();
        let bvar = *others.choose(rng).expect("two others");
        b.present = rng.gen_bool(0.8);
        b.sentence(template, &[a, bvar], &mut kin);
    }
    b.finish(doc_id, 0, 1)
}

/// `config.num_docs` documents, reproducible from `config.seed`.
pub fn generate_corpus(config: &SynthConfig) -> Result<Vec<PovDocument>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.num_docs)
        .map(|i| generate_document(&format!("synth-{}-{i:03}", config.seed), config, &mut rng))
        .collect()
}

/// The narrator Nick Flynn, his neighbour Phil and Emily, in three sentences.
pub fn nick_document() -> Result<PovDocument> {
    let people = vec![
        Person { given: "Nick".into(), family: Some("Flynn".into()), gender: Gender::Masculine, focus: true },
        Person { given: "Phil".into(), family: None, gender: Gender::Masculine, focus: false },
        Person { given: "Emily".into(), family: None, gender: Gender::Feminine, focus: false },
    ];
    let mut b = Builder::new(people);
    let mut relatives = ["father", "mother", "brother", "grandfather"].into_iter().cycle();
    let mut kin = move || relatives.next().expect("cycle");
    b.sentence("REL:a and REL:a VD:raise O:a with REL:a and REL:a .", &[0], &mut kin);
    b.sentence("S:a V:return to Boston , to P:a job .", &[1], &mut kin);
    b.sentence(
        "S:a V:drive to the city every other week , to W:work a night or two at Pine Street , to W:see O:b .",
        &[0, 2],
        &mut kin,
    );
    b.finish("nick", 0, 1)
}

/// The two sentences about Phil, the narrator and Emily, with the gold edits
/// I -> Nick and drive -> drives.
pub fn running_example() -> Result<PovDocument> {
    let people = vec![
        Person { given: "Phil".into(), family: None, gender: Gender::Masculine, focus: false },
        Person { given: "Nick".into(), family: Some("Flynn".into()), gender: Gender::Masculine, focus: true },
        Person { given: "Emily".into(), family: None, gender: Gender::Feminine, focus: false },
    ];
    let mut b = Builder::new(people);
    let mut kin = || "father";
    b.sentence("S:a V:return to Boston , to P:a job .", &[0], &mut kin);
    b.sentence(
        "S:a V:drive to the city every other week , to W:work a night or two at Pine Street , to W:see O:b .",
        &[1, 2],
        &mut kin,
    );
    let mut pov = b.finish("running-example", 1, 0)?;
    let doc = &pov.doc;
    pov.gold.replacements.retain(|r| r.string != doc.span_text(r.span));
    for r in &mut pov.gold.replacements {
        r.string = "Nick".into();
    }
    Ok(pov)
}
