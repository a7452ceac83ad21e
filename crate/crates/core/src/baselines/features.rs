//! Feature vectors for the tree baselines.

use crate::candidates::{kind_of, CandidateKind};
use crate::context::{distance_bucket, MentionContext, SlotContext, DISTANCE_BUCKETS};
use crate::document::Role;
use crate::ranker::EmbeddingProvider;

const NEIGHBOURS: usize = 10;
/// Distance buckets, kind, same entity, same sentence, agreement, same string,
/// length, padding.
const PER_MENTION: usize = DISTANCE_BUCKETS + 3 + 1 + 1 + 1 + 1 + 6 + 1;
const HEAD_POS: &[&str] = &["PRP", "PRP$", "NNP", "NN"];
/// Three groups of ten mentions, then context fit, head POS (plus other), subject or
/// object, candidate kind, candidate length, used before, used previously, first or
/// second mention.
pub const TREE_FEATURES: usize = 3 * NEIGHBOURS * PER_MENTION + 1 + HEAD_POS.len() + 1 + 1 + 3 + 6 + 3;

fn kind_index(k: CandidateKind) -> usize {
    match k {
        CandidateKind::ProperNp => 0,
        CandidateKind::Pronoun => 1,
        CandidateKind::CommonNp => 2,
    }
}

fn length_index(words: usize) -> usize {
    words.clamp(1, 6) - 1
}

fn push_mention(out: &mut Vec<f64>, m: Option<&MentionContext>, candidate: &str) {
    let start = out.len();
    out.resize(start + PER_MENTION, 0.0);
    let f = &mut out[start..];
    let Some(m) = m else {
        f[PER_MENTION - 1] = 1.0;
        return;
    };
    f[distance_bucket(m.distance)] = 1.0;
    let mut o = DISTANCE_BUCKETS;
    f[o + kind_index(m.kind)] = 1.0;
    o += 3;
    f[o] = m.same_entity as u8 as f64;
    f[o + 1] = m.same_sentence as u8 as f64;
    f[o + 2] = m.agrees as u8 as f64;
    let text = m.text().replace(" 's", "'s");
    f[o + 3] = (!m.unresolved && text.eq_ignore_ascii_case(candidate)) as u8 as f64;
    o += 4;
    f[o + length_index(m.tokens.len())] = 1.0;
}

/// Nearest mentions first, padded to ten.
fn push_group<'a>(out: &mut Vec<f64>, ms: impl Iterator<Item = &'a MentionContext>, candidate: &str) {
    let ms: Vec<&MentionContext> = ms.take(NEIGHBOURS).collect();
    for i in 0..NEIGHBOURS {
        push_mention(out, ms.get(i).copied(), candidate);
    }
}

pub fn tree_features(slot: &SlotContext, candidate: &str, provider: &dyn EmbeddingProvider) -> Vec<f64> {
    let mut out = Vec::with_capacity(TREE_FEATURES);
    push_group(&mut out, slot.left_mentions.iter().rev(), candidate);
    push_group(&mut out, slot.right_mentions.iter(), candidate);
    push_group(&mut out, slot.prior_same_entity.iter().rev(), candidate);
    let cand_tokens = slot.candidate_tokens(candidate);
    out.push(provider.context_fit(&cand_tokens, &slot.left_tokens, &slot.right_tokens));
    let mut pos = [0.0; 5];
    let idx = HEAD_POS.iter().position(|p| *p == slot.head_pos).unwrap_or(HEAD_POS.len());
    pos[idx] = 1.0;
    out.extend(pos);
    out.push((slot.role != Role::Other) as u8 as f64);
    let mut kind = [0.0; 3];
    kind[kind_index(kind_of(candidate))] = 1.0;
    out.extend(kind);
    let mut len = [0.0; 6];
    len[length_index(candidate.split_whitespace().count())] = 1.0;
    out.extend(len);
    out.push(slot.prior_strings.iter().any(|s| s == candidate) as u8 as f64);
    out.push(slot.prior_strings.last().is_some_and(|s| s == candidate) as u8 as f64);
    out.push((slot.mention_index <= 1) as u8 as f64);
    debug_assert_eq!(out.len(), TREE_FEATURES);
    out
}
