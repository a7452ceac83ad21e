//! End-to-end conversion: focus and confounder identification, verb agreement,
//! candidate generation and left-to-right mention selection.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::candidates::{
    build_confounder_candidates, build_focus_candidates, candidate_string, canonicalize, narrow_by_case, Candidate,
    RelationalLexicon,
};
use crate::context::{capitalize, ChainState, ContextBuilder, MentionKey, SlotContext};
use crate::document::{ChainId, Document, EntityRole, EntitySpec, Gender, Mention, Number, Pov, TokenSpan};
use crate::error::{Error, Result};
use crate::ingest::{PovDocument, RankingExample};
use crate::morph::{plan_verb_edits, AgreementRules, Conjugator, RuleUsed, VerbEdit};
use crate::preprocess::{identify_confounders, identify_focus_chain, Confounders, PerformativeLexicon};
use crate::pronoun::{self, Person};
use crate::ranker::{EmbeddingProvider, Ranker, Vocab};

/// Lexicons and rules used by the pipeline.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    pub conjugator: Conjugator,
    pub agreement: AgreementRules,
    pub relational: RelationalLexicon,
    pub performatives: PerformativeLexicon,
}

impl Resources {
    pub fn builtin() -> Self {
        Resources { relational: RelationalLexicon::builtin(), ..Default::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntityPlan {
    pub chain_id: ChainId,
    pub role: EntityRole,
    pub gender: Gender,
    pub number: Number,
    pub candidates: Vec<Candidate>,
}

/// Output of steps 1 to 3.
#[derive(Clone, Debug, PartialEq)]
pub struct ConversionPlan {
    pub focus: ChainId,
    pub from_pov: Pov,
    pub confounders: Confounders,
    pub entities: Vec<EntityPlan>,
    pub verb_edits: Vec<VerbEdit>,
}

impl ConversionPlan {
    pub fn entity(&self, id: &ChainId) -> Option<&EntityPlan> {
        self.entities.iter().find(|e| &e.chain_id == id)
    }

    pub fn scheduled_chains(&self) -> Vec<ChainId> {
        self.entities.iter().map(|e| e.chain_id.clone()).collect()
    }

    fn verb_map(&self) -> HashMap<usize, String> {
        self.verb_edits.iter().filter(|v| v.changes()).map(|v| (v.token_index, v.new_form.clone())).collect()
    }
}

/// Rewrites singular deictic pronouns of the original PoV inside a confounder string
/// ("my father" -> "his father").
fn deictic_to_third(string: &str, from_pov: Pov, gender: Gender) -> String {
    let mut changed = false;
    let words: Vec<String> = string
        .split_whitespace()
        .map(|w| match pronoun::lookup(w) {
            Some(info) if info.person == from_pov.person() && info.person != Person::Third && info.number != Some(Number::Plural) => {
                match pronoun::third_singular(gender, info.cases[0]) {
                    Some(p) => {
                        changed = true;
                        p.to_owned()
                    }
                    None => w.to_owned(),
                }
            }
            _ => w.to_owned(),
        })
        .collect();
    if changed {
        words.join(" ")
    } else {
        string.to_owned()
    }
}

/// Steps 1 to 3: identify the focus chain and confounders, re-conjugate agreement
/// verbs and build candidate sets.
pub fn plan_conversion(doc: &Document, spec: &EntitySpec, from_pov: Pov, res: &Resources) -> Result<ConversionPlan> {
    spec.validate().map_err(Error::Argument)?;
    let focus = identify_focus_chain(doc, spec, from_pov)?;
    let confounders = identify_confounders(doc, &focus, spec.gender, from_pov);
    let verb_edits = plan_verb_edits(doc, &focus, &res.agreement, &res.conjugator)?;
    let mut entities = vec![EntityPlan {
        chain_id: focus.clone(),
        role: EntityRole::Focus,
        gender: spec.gender,
        number: Number::Singular,
        candidates: build_focus_candidates(doc, &focus, spec, &res.relational)?,
    }];
    for id in confounders.all() {
        let chain = doc.chain(id).expect("confounders come from the document");
        let cands = build_confounder_candidates(doc, id, &confounders, spec.gender)
            .into_iter()
            .map(|c| {
                let s = deictic_to_third(&c.string, from_pov, spec.gender);
                if s == c.string {
                    c
                } else {
                    Candidate::new(s, c.source)
                }
            })
            .collect();
        let number = if confounders.plural.contains(id) { Number::Plural } else { chain.number };
        entities.push(EntityPlan {
            chain_id: id.clone(),
            role: EntityRole::Confounder,
            gender: chain.gender,
            number,
            candidates: canonicalize(cands),
        });
    }
    Ok(ConversionPlan { focus, from_pov, confounders, entities, verb_edits })
}

/// What a selector sees for one mention slot.
pub struct SelectionInput<'a> {
    pub key: MentionKey,
    pub mention: &'a Mention,
    pub entity: &'a EntityPlan,
    pub slot: &'a SlotContext,
    /// Case-narrowed candidates in canonical order.
    pub candidates: &'a [Candidate],
}

/// Chooses the string for a mention slot, normally one of `input.candidates`.
pub trait MentionSelector {
    fn select(&mut self, input: &SelectionInput<'_>) -> Result<String>;
}

/// Selection by the neural ranker; ties go to the earliest candidate.
pub struct RankerSelector<'a> {
    pub ranker: &'a Ranker,
    pub provider: &'a dyn EmbeddingProvider,
}

impl MentionSelector for RankerSelector<'_> {
    fn select(&mut self, input: &SelectionInput<'_>) -> Result<String> {
        let strings: Vec<String> = input.candidates.iter().map(|c| c.string.clone()).collect();
        let mut vocab = Vocab::new();
        let enc = self.ranker.encode(input.slot, &strings, self.provider, &mut vocab)?;
        let scores = self.ranker.scores(&enc, &vocab);
        Ok(strings[crate::ranker::argmax(&scores)].clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionEditRecord {
    pub char_start: usize,
    pub char_end: usize,
    pub old: String,
    pub new: String,
    pub chain_id: ChainId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbEditRecord {
    pub char_start: usize,
    pub char_end: usize,
    pub old: String,
    pub new: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleUsed>,
}

/// Converted text and the edits producing it. Offsets are character offsets into the
/// input text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversionResult {
    pub doc_id: String,
    pub text: String,
    pub mention_edits: Vec<MentionEditRecord>,
    pub verb_edits: Vec<VerbEditRecord>,
}

impl ConversionResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("conversion results always serialize")
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::Schema {
            path: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })
    }
}

fn sentence_initial(doc: &Document, span: TokenSpan) -> bool {
    let Some(sent) = doc.sentences.get(doc.tokens[span.start].sentence_index) else {
        return false;
    };
    (sent.start..span.start).all(|i| matches!(doc.tokens[i].surface.as_str(), "\"" | "“" | "``" | "'" | "‘" | "("))
}

/// Applies mention replacements and verb changes to the source text. Overlapping
/// replacements keep the earlier, longer one. Sentence-initial replacements are
/// capitalized.
pub fn apply_edits(
    doc: &Document,
    mentions: &[(ChainId, TokenSpan, String)],
    verbs: &[(usize, String, Option<RuleUsed>)],
) -> ConversionResult {
    let chars: Vec<char> = doc.source_text.chars().collect();
    let slice = |a: usize, b: usize| chars[a..b].iter().collect::<String>();
    let mut pieces: Vec<(usize, usize, String, Option<usize>)> = Vec::new();
    let mut sorted: Vec<&(ChainId, TokenSpan, String)> = mentions.iter().collect();
    sorted.sort_by_key(|(_, s, _)| (s.start, std::cmp::Reverse(s.end)));
    let mut mention_edits = Vec::new();
    let mut last_end: Option<usize> = None;
    for (chain_id, span, string) in sorted {
        if last_end.is_some_and(|e| span.start <= e) {
            continue;
        }
        last_end = Some(span.end);
        let (a, b) = (doc.tokens[span.start].char_span.0, doc.tokens[span.end].char_span.1);
        let old = slice(a, b);
        let new = if sentence_initial(doc, *span) { capitalize(string) } else { string.clone() };
        if new != old {
            pieces.push((a, b, new.clone(), None));
            mention_edits.push(MentionEditRecord { char_start: a, char_end: b, old, new, chain_id: chain_id.clone() });
        }
    }
    let mut verb_edits = Vec::new();
    let mut verbs: Vec<&(usize, String, Option<RuleUsed>)> = verbs.iter().collect();
    verbs.sort_by_key(|v| v.0);
    for (i, new, rule) in verbs {
        let (a, b) = doc.tokens[*i].char_span;
        let old = slice(a, b);
        let covered = pieces.iter().any(|p| p.0 <= a && b <= p.1);
        if *new != old && !covered {
            pieces.push((a, b, new.clone(), Some(*i)));
            verb_edits.push(VerbEditRecord { char_start: a, char_end: b, old, new: new.clone(), rule: *rule });
        }
    }
    pieces.sort_by_key(|p| p.0);
    let mut text = String::new();
    let mut pos = 0;
    for (a, b, new, _) in &pieces {
        text.push_str(&slice(pos, *a));
        text.push_str(new);
        pos = *b;
    }
    text.push_str(&slice(pos, chars.len()));
    ConversionResult { doc_id: doc.doc_id.clone(), text, mention_edits, verb_edits }
}

/// One resolved mention slot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chain_id: ChainId,
    pub span: TokenSpan,
    pub string: String,
    pub candidates: Vec<String>,
    pub narrowing_fallback: bool,
}

/// Step 4: selects a string for every unmasked focus and confounder mention, left to
/// right, conditioning on earlier selections.
pub fn select_mentions(
    doc: &Document,
    plan: &ConversionPlan,
    selector: &mut dyn MentionSelector,
    n: usize,
    k: usize,
) -> Result<(ConversionResult, Vec<Selection>)> {
    let builder = ContextBuilder::new(doc, &plan.scheduled_chains(), plan.verb_map(), n, k, false);
    let mut state = ChainState::default();
    let mut selections = Vec::new();
    for key in builder.scheduled_order() {
        let m = builder.mention(key);
        let entity = plan.entity(&m.chain_id).expect("scheduled chains have plans");
        if entity.candidates.is_empty() {
            return Err(Error::Argument(format!("no candidates for chain {}", entity.chain_id)));
        }
        let (narrowed, fallback) = narrow_by_case(&entity.candidates, m);
        let slot = builder.slot(key, &state);
        let chosen = if narrowed.len() == 1 {
            narrowed[0].string.clone()
        } else {
            let input = SelectionInput { key, mention: m, entity, slot: &slot, candidates: &narrowed };
            selector.select(&input)?
        };
        state.resolve(key, chosen.clone());
        selections.push(Selection {
            chain_id: m.chain_id.clone(),
            span: m.span,
            string: chosen,
            candidates: narrowed.iter().map(|c| c.string.clone()).collect(),
            narrowing_fallback: fallback,
        });
    }
    let mentions: Vec<(ChainId, TokenSpan, String)> =
        selections.iter().map(|s| (s.chain_id.clone(), s.span, s.string.clone())).collect();
    let verbs: Vec<(usize, String, Option<RuleUsed>)> = plan
        .verb_edits
        .iter()
        .map(|v| (v.token_index, v.new_form.clone(), Some(v.rule_used)))
        .collect();
    Ok((apply_edits(doc, &mentions, &verbs), selections))
}

/// Steps 1 to 4.
pub fn convert(
    doc: &Document,
    spec: &EntitySpec,
    from_pov: Pov,
    res: &Resources,
    selector: &mut dyn MentionSelector,
    n: usize,
    k: usize,
) -> Result<(ConversionPlan, ConversionResult, Vec<Selection>)> {
    let plan = plan_conversion(doc, spec, from_pov, res)?;
    let (result, selections) = select_mentions(doc, &plan, selector, n, k)?;
    Ok((plan, result, selections))
}

/// Gold conversion of a benchmark document. Mentions without a gold replacement keep
/// their text.
pub fn gold_result(pov: &PovDocument) -> ConversionResult {
    let mentions: Vec<(ChainId, TokenSpan, String)> =
        pov.gold.replacements.iter().map(|r| (r.chain_id.clone(), r.span, r.string.clone())).collect();
    let verbs: Vec<(usize, String, Option<RuleUsed>)> =
        pov.gold.verb_changes.iter().map(|v| (v.token, v.string.clone(), None)).collect();
    apply_edits(&pov.doc, &mentions, &verbs)
}

/// Ranking examples from a benchmark document: candidate sets come from the
/// pipeline plan, observed strings from the gold replacements (the original string
/// where none is given), and left context from the gold strings. Slots whose gold
/// string is not a candidate are dropped.
pub fn gold_ranking_examples(
    pov: &PovDocument,
    plan: &ConversionPlan,
    n: usize,
    k: usize,
) -> Vec<RankingExample> {
    let doc = &pov.doc;
    let gold: HashMap<(ChainId, TokenSpan), &str> =
        pov.gold.replacements.iter().map(|r| ((r.chain_id.clone(), r.span), r.string.as_str())).collect();
    let builder = ContextBuilder::new(doc, &plan.scheduled_chains(), plan.verb_map(), n, k, false);
    let mut state = ChainState::default();
    let mut out = Vec::new();
    for key in builder.scheduled_order() {
        let m = builder.mention(key);
        let entity = plan.entity(&m.chain_id).expect("scheduled chains have plans");
        let string = gold
            .get(&(m.chain_id.clone(), m.span))
            .map(|s| (*s).to_owned())
            .unwrap_or_else(|| candidate_string(doc, m));
        let candidate_set: Vec<String> = entity.candidates.iter().map(|c| c.string.clone()).collect();
        if candidate_set.contains(&string) {
            out.push(RankingExample {
                doc_id: doc.doc_id.clone(),
                chain_id: m.chain_id.clone(),
                mention_index: m.position_in_chain,
                gold_string: string.clone(),
                candidate_set,
                context: builder.slot(key, &state),
            });
        } else {
            log::debug!("gold string {string:?} is not a candidate for chain {}", m.chain_id);
        }
        state.resolve(key, string);
    }
    out
}
