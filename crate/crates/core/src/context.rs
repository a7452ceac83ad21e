//! Left/right token and mention windows around a mention slot, rendered from the
//! selections made so far.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::candidates::{candidate_string, kind_of, slot_case, CandidateKind};
use crate::document::{CaseClass, ChainId, Document, EntityKind, Gender, Mention, Number, Role};

pub const PAD: &str = "<pad>";
pub const SEP: &str = "<sep>";
pub const UNK: &str = "<unk>";

/// Number of distance buckets: d<=5, (5,10], (10,15], (15,20], (20,25], >25.
pub const DISTANCE_BUCKETS: usize = 6;

pub fn distance_bucket(d: usize) -> usize {
    match d {
        0..=5 => 0,
        6..=10 => 1,
        11..=15 => 2,
        16..=20 => 3,
        21..=25 => 4,
        _ => 5,
    }
}

/// Splits a mention string into tokens, separating possessive clitics.
pub fn tokenize_string(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for w in s.split_whitespace() {
        let split = ["'s", "’s"]
            .iter()
            .find_map(|suffix| w.strip_suffix(suffix).filter(|stem| !stem.is_empty()).map(|stem| (stem, *suffix)));
        match split {
            Some((stem, suffix)) => {
                out.push(stem.to_owned());
                out.push(suffix.to_owned());
            }
            None => out.push(w.to_owned()),
        }
    }
    out
}

pub fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MentionKey {
    pub chain: usize,
    pub pos: usize,
}

/// A neighbouring mention as seen from the current slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MentionContext {
    pub tokens: Vec<String>,
    /// Belongs to the entity whose mention is being ranked.
    pub same_entity: bool,
    pub distance: usize,
    pub same_sentence: bool,
    /// Same number and gender as the ranked entity.
    pub agrees: bool,
    pub kind: CandidateKind,
    /// Scheduled for rewriting but not yet resolved.
    pub unresolved: bool,
}

impl MentionContext {
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Everything the ranker and the baselines know about one mention slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlotContext {
    pub left_tokens: Vec<String>,
    pub right_tokens: Vec<String>,
    pub left_mentions: Vec<MentionContext>,
    pub right_mentions: Vec<MentionContext>,
    /// Up to ten earlier mentions of the same entity, in document order.
    pub prior_same_entity: Vec<MentionContext>,
    /// Strings already used for earlier mentions of the entity, in order.
    pub prior_strings: Vec<String>,
    pub mention_index: usize,
    pub role: Role,
    pub case: CaseClass,
    pub original: String,
    pub head_pos: String,
    pub sentence_initial: bool,
    pub number: Number,
    pub gender: Gender,
}

impl SlotContext {
    /// Candidate string as it would appear in this slot.
    pub fn candidate_tokens(&self, candidate: &str) -> Vec<String> {
        let mut toks = tokenize_string(candidate);
        if self.sentence_initial {
            if let Some(first) = toks.first_mut() {
                *first = capitalize(first);
            }
        }
        toks
    }
}

/// Selections made so far, keyed by mention.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ChainState {
    selections: HashMap<MentionKey, String>,
}

impl ChainState {
    pub fn resolve(&mut self, key: MentionKey, string: impl Into<String>) {
        self.selections.insert(key, string.into());
    }

    pub fn get(&self, key: MentionKey) -> Option<&str> {
        self.selections.get(&key).map(String::as_str)
    }

    pub fn is_resolved(&self, key: MentionKey) -> bool {
        self.selections.contains_key(&key)
    }

    pub fn len(&self) -> usize {
        self.selections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selections.is_empty()
    }
}

pub struct ContextBuilder<'a> {
    doc: &'a Document,
    n: usize,
    k: usize,
    order: Vec<MentionKey>,
    order_index: HashMap<MentionKey, usize>,
    scheduled: HashSet<MentionKey>,
    scheduled_starts: BTreeMap<usize, MentionKey>,
    verb_edits: HashMap<usize, String>,
}

fn is_opening_punct(s: &str) -> bool {
    matches!(s, "\"" | "“" | "``" | "'" | "‘" | "(" | "-LRB-")
}

impl<'a> ContextBuilder<'a> {
    /// `scheduled_chains` lists the chains whose unmasked mentions get rewritten.
    /// Without `allow_nested`, mentions strictly inside another scheduled mention
    /// are left to the outer one.
    pub fn new(
        doc: &'a Document,
        scheduled_chains: &[ChainId],
        verb_edits: HashMap<usize, String>,
        n: usize,
        k: usize,
        allow_nested: bool,
    ) -> Self {
        let mut scheduled: Vec<(MentionKey, &Mention)> = Vec::new();
        for id in scheduled_chains {
            let Some(ci) = doc.chain_index(id) else { continue };
            for (pos, m) in doc.chains[ci].mentions.iter().enumerate() {
                if !m.is_masked() {
                    scheduled.push((MentionKey { chain: ci, pos }, m));
                }
            }
        }
        scheduled.sort_by_key(|(k, m)| (m.span.start, std::cmp::Reverse(m.span.end), *k));
        let mut kept: Vec<(MentionKey, &Mention)> = Vec::new();
        for (key, m) in scheduled {
            let duplicate = kept.iter().any(|(_, o)| o.span == m.span);
            let nested = kept.iter().any(|(_, o)| o.span.covers(&m.span));
            if duplicate || (nested && !allow_nested) {
                continue;
            }
            kept.push((key, m));
        }
        let scheduled_set: HashSet<MentionKey> = kept.iter().map(|(k, _)| *k).collect();
        let mut scheduled_starts = BTreeMap::new();
        for (key, m) in &kept {
            scheduled_starts.entry(m.span.start).or_insert(*key);
        }

        let mut order: Vec<(MentionKey, &Mention)> = Vec::new();
        for (ci, chain) in doc.chains.iter().enumerate() {
            if chain.entity_kind != EntityKind::Person && !scheduled_chains.contains(&chain.chain_id)
            {
                continue;
            }
            for (pos, m) in chain.mentions.iter().enumerate() {
                let key = MentionKey { chain: ci, pos };
                let swallowed = !scheduled_set.contains(&key)
                    && !allow_nested
                    && kept
                        .iter()
                        .any(|(_, o)| o.span.covers(&m.span) && o.span != m.span);
                if !swallowed {
                    order.push((key, m));
                }
            }
        }
        order.sort_by_key(|(k, m)| (m.span.start, std::cmp::Reverse(m.span.end), *k));
        let order: Vec<MentionKey> = order.into_iter().map(|(k, _)| k).collect();
        let order_index = order.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        ContextBuilder {
            doc,
            n,
            k,
            order,
            order_index,
            scheduled: scheduled_set,
            scheduled_starts,
            verb_edits,
        }
    }

    pub fn doc(&self) -> &Document {
        self.doc
    }

    pub fn mention(&self, key: MentionKey) -> &'a Mention {
        &self.doc.chains[key.chain].mentions[key.pos]
    }

    pub fn is_scheduled(&self, key: MentionKey) -> bool {
        self.scheduled.contains(&key)
    }

    /// Scheduled mentions in the order they are resolved.
    pub fn scheduled_order(&self) -> Vec<MentionKey> {
        let mut keys: Vec<MentionKey> = self.scheduled.iter().copied().collect();
        keys.sort_by_key(|k| {
            let m = self.mention(*k);
            (m.span.start, std::cmp::Reverse(m.span.end), *k)
        });
        keys
    }

    pub fn verb_edits(&self) -> &HashMap<usize, String> {
        &self.verb_edits
    }

    /// True when only opening punctuation precedes the mention in its sentence.
    pub fn sentence_initial(&self, m: &Mention) -> bool {
        let Some(sent) = self.doc.sentences.get(self.doc.tokens[m.span.start].sentence_index) else {
            return false;
        };
        (sent.start..m.span.start).all(|i| is_opening_punct(&self.doc.tokens[i].surface))
    }

    fn selection_tokens(&self, key: MentionKey, state: &ChainState) -> Vec<String> {
        match state.get(key) {
            Some(s) => {
                let mut toks = tokenize_string(s);
                if self.sentence_initial(self.mention(key)) {
                    if let Some(first) = toks.first_mut() {
                        *first = capitalize(first);
                    }
                }
                toks
            }
            None => vec![UNK.to_owned()],
        }
    }

    fn surface(&self, i: usize) -> String {
        match self.verb_edits.get(&i) {
            Some(v) => v.clone(),
            None => self.doc.tokens[i].surface.clone(),
        }
    }

    /// Rendered tokens for `[lo, hi)`: resolved mentions show their selection,
    /// unresolved scheduled mentions a single unknown token.
    pub fn render_range(&self, lo: usize, hi: usize, state: &ChainState) -> Vec<String> {
        let mut out = Vec::new();
        let mut i = lo;
        while i < hi {
            if let Some(key) = self.scheduled_starts.get(&i) {
                let m = self.mention(*key);
                if m.span.end < hi {
                    out.extend(self.selection_tokens(*key, state));
                    i = m.span.end + 1;
                    continue;
                }
            }
            out.push(self.surface(i));
            i += 1;
        }
        out
    }

    fn mention_tokens(&self, key: MentionKey, state: &ChainState) -> Vec<String> {
        if self.scheduled.contains(&key) {
            self.selection_tokens(key, state)
        } else {
            let m = self.mention(key);
            self.render_range(m.span.start, m.span.end + 1, state)
        }
    }

    /// String of a mention as currently rendered (selection, or normalized original).
    pub fn current_string(&self, key: MentionKey, state: &ChainState) -> Option<String> {
        if self.scheduled.contains(&key) {
            state.get(key).map(str::to_owned)
        } else {
            Some(candidate_string(self.doc, self.mention(key)))
        }
    }

    fn traits(&self, chain: usize) -> (Number, Gender) {
        let c = &self.doc.chains[chain];
        (c.number, c.gender)
    }

    fn neighbour(&self, key: MentionKey, current: MentionKey, state: &ChainState) -> MentionContext {
        let m = self.mention(key);
        let cur = self.mention(current);
        let distance = if m.span.end < cur.span.start {
            cur.span.start - m.span.end
        } else {
            m.span.start.saturating_sub(cur.span.end)
        };
        let tokens = self.mention_tokens(key, state);
        let unresolved = self.scheduled.contains(&key) && !state.is_resolved(key);
        let kind = if unresolved {
            CandidateKind::CommonNp
        } else {
            kind_of(&tokens.join(" ").replace(" 's", "'s"))
        };
        MentionContext {
            tokens,
            same_entity: key.chain == current.chain,
            distance,
            same_sentence: self.doc.tokens[m.span.start].sentence_index
                == self.doc.tokens[cur.span.start].sentence_index,
            agrees: self.traits(key.chain) == self.traits(current.chain),
            kind,
            unresolved,
        }
    }

    /// Context of a mention slot given the selections so far.
    pub fn slot(&self, key: MentionKey, state: &ChainState) -> SlotContext {
        let m = self.mention(key);
        let n_tok = self.doc.tokens.len();
        let lo = m.span.start.saturating_sub(3 * self.n);
        let mut left_tokens = self.render_range(lo, m.span.start, state);
        if left_tokens.len() > self.n {
            left_tokens.drain(..left_tokens.len() - self.n);
        }
        let hi = (m.span.end + 1 + 3 * self.n).min(n_tok);
        let mut right_tokens = self.render_range(m.span.end + 1, hi, state);
        right_tokens.truncate(self.n);

        let idx = self.order_index.get(&key).copied().unwrap_or(0);
        let left_keys = &self.order[idx.saturating_sub(self.k)..idx];
        let right_keys = &self.order[(idx + 1).min(self.order.len())..(idx + 1 + self.k).min(self.order.len())];
        let left_mentions = left_keys.iter().map(|k| self.neighbour(*k, key, state)).collect();
        let right_mentions = right_keys.iter().map(|k| self.neighbour(*k, key, state)).collect();

        let earlier: Vec<MentionKey> = self.order[..idx]
            .iter()
            .copied()
            .filter(|k| k.chain == key.chain)
            .collect();
        let prior_same_entity = earlier[earlier.len().saturating_sub(10)..]
            .iter()
            .map(|k| self.neighbour(*k, key, state))
            .collect();
        let prior_strings = earlier
            .iter()
            .filter_map(|k| self.current_string(*k, state))
            .collect();
        let (number, gender) = self.traits(key.chain);
        SlotContext {
            left_tokens,
            right_tokens,
            left_mentions,
            right_mentions,
            prior_same_entity,
            prior_strings,
            mention_index: m.position_in_chain,
            role: m.role,
            case: slot_case(m),
            original: m.string.clone(),
            head_pos: self.doc.tokens[m.span.end].pos.clone(),
            sentence_initial: self.sentence_initial(m),
            number,
            gender,
        }
    }

    /// Final text with all resolved selections and verb edits applied.
    pub fn render_text(&self, state: &ChainState) -> String {
        let toks = self.render_range(0, self.doc.tokens.len(), state);
        detokenize(&toks)
    }
}

/// Joins tokens with spaces, attaching punctuation and clitics to their neighbours.
pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    detokenize_with_offsets(tokens).0
}

/// Detokenized text plus the half-open character span of every token.
pub fn detokenize_with_offsets<S: AsRef<str>>(tokens: &[S]) -> (String, Vec<(usize, usize)>) {
    let mut out = String::new();
    let mut len = 0usize;
    let mut spans = Vec::with_capacity(tokens.len());
    let mut open_quote = false;
    let mut glue_next = false;
    for t in tokens {
        let t = t.as_ref();
        let attach_left = matches!(
            t,
            "." | "," | ";" | ":" | "!" | "?" | ")" | "''" | "”" | "%" | "'s" | "’s" | "n't" | "'m"
                | "'re" | "'ve" | "'d" | "'ll" | "'" | "..."
        ) || (t == "\"" && open_quote);
        if !out.is_empty() && !attach_left && !glue_next {
            out.push(' ');
            len += 1;
        }
        glue_next = matches!(t, "(" | "``" | "“" | "$") || (t == "\"" && !open_quote);
        if t == "\"" {
            open_quote = !open_quote;
        }
        let n = t.chars().count();
        spans.push((len, len + n));
        out.push_str(t);
        len += n;
    }
    (out, spans)
}
