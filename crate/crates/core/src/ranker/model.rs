//! Parameter layout, input encoding, scoring and the analytic gradient of the ranking loss.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::embedding::EmbeddingProvider;
use super::lstm::{dot, LstmLayout, Trace};
use crate::container::{Container, ModelKind};
use crate::context::{distance_bucket, SlotContext, DISTANCE_BUCKETS, PAD, SEP, UNK};
use crate::document::Role;
use crate::error::{Error, Result};

pub const MENTION_FEATURES: usize = 1 + DISTANCE_BUCKETS;
pub const CANDIDATE_FEATURES: usize = 10;

/// Which parts of the model are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub token_lstm: bool,
    pub mention_lstm: bool,
    pub mention_features: bool,
    pub candidate_features: bool,
}

impl Default for FeatureSet {
    fn default() -> Self {
        FeatureSet { token_lstm: true, mention_lstm: true, mention_features: true, candidate_features: true }
    }
}

impl FeatureSet {
    pub fn label(&self) -> String {
        if *self == FeatureSet::default() {
            return "full".into();
        }
        let mut parts = Vec::new();
        if self.token_lstm {
            parts.push("token");
        }
        if self.mention_lstm {
            parts.push("mention");
        }
        if self.mention_lstm && self.mention_features {
            parts.push("phi_t");
        }
        if self.candidate_features {
            parts.push("phi_b");
        }
        parts.join("+")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Token window on each side.
    pub n: usize,
    /// Mention window on each side.
    pub k: usize,
    pub lstm_hidden: usize,
    pub mlp_hidden: usize,
    pub margin: f64,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub batch_size: usize,
    /// Stop as soon as dev accuracy reaches this value.
    pub stop_at_dev_accuracy: Option<f64>,
    pub features: FeatureSet,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n: 50,
            k: 10,
            lstm_hidden: 50,
            mlp_hidden: 100,
            margin: 0.2,
            learning_rate: 1e-3,
            dropout: 0.2,
            seed: 13,
            max_epochs: 200,
            patience: 20,
            batch_size: 16,
            stop_at_dev_accuracy: None,
            features: FeatureSet::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Argument(format!("{what} must be positive")));
        if self.n == 0 {
            return bad("n");
        }
        if self.k == 0 {
            return bad("k");
        }
        if self.lstm_hidden == 0 {
            return bad("lstm_hidden");
        }
        if self.mlp_hidden == 0 {
            return bad("mlp_hidden");
        }
        if !(self.margin > 0.0) {
            return bad("margin");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Argument("dropout must be in [0, 1)".into()));
        }
        if !self.features.token_lstm && !self.features.mention_lstm {
            return Err(Error::Argument("at least one of the token and mention encoders must be enabled".into()));
        }
        Ok(())
    }

    /// Learning rate, margin and dropout combinations searched by `grid_search`.
    pub fn grid() -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for lr in [1e-3, 3e-4] {
            for margin in [0.1, 0.2, 0.5] {
                for dropout in [0.0, 0.2, 0.5] {
                    out.push((lr, margin, dropout));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub dev_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub corpus_hash: String,
    pub num_examples: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub stop_reason: String,
    pub history: Vec<EpochRecord>,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Layout {
    pub d: usize,
    pub tok_l: Option<LstmLayout>,
    pub tok_r: Option<LstmLayout>,
    pub men_l: Option<LstmLayout>,
    pub men_r: Option<LstmLayout>,
    pub feat: usize,
    pub w_s: usize,
    pub b_s: usize,
    pub v_s: usize,
    pub total: usize,
}

impl Layout {
    fn new(config: &ModelConfig, d: usize) -> Self {
        let h = config.lstm_hidden;
        let f = config.features;
        let mut off = 3 * d;
        let mut lstm = |input: usize, on: bool| {
            on.then(|| {
                let l = LstmLayout::new(input, h, off);
                off = l.end();
                l
            })
        };
        let tok_l = lstm(d, f.token_lstm);
        let tok_r = lstm(d, f.token_lstm);
        let men_in = if f.mention_features { d + MENTION_FEATURES } else { d };
        let men_l = lstm(men_in, f.mention_lstm);
        let men_r = lstm(men_in, f.mention_lstm);
        let feat = if f.token_lstm { 2 * h } else { 0 }
            + if f.mention_lstm { 2 * h } else { 0 }
            + if f.candidate_features { CANDIDATE_FEATURES } else { 0 };
        let m = config.mlp_hidden;
        let w_s = off;
        let b_s = w_s + m * feat;
        let v_s = b_s + m;
        Layout { d, tok_l, tok_r, men_l, men_r, feat, w_s, b_s, v_s, total: v_s + m }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Tok {
    Word(u32),
    Pad,
    Sep,
    Unk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct MTok {
    tok: Tok,
    /// Same-entity flag and distance bucket; `None` for separators and padding.
    feat: Option<(bool, u8)>,
}

/// Frozen provider vectors for the tokens seen so far.
#[derive(Default)]
pub struct Vocab {
    index: HashMap<String, u32>,
    vectors: Vec<f64>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    fn tok(&mut self, token: &str, provider: &dyn EmbeddingProvider) -> Tok {
        match token {
            PAD => Tok::Pad,
            SEP => Tok::Sep,
            UNK => Tok::Unk,
            _ => {
                if let Some(&i) = self.index.get(token) {
                    return Tok::Word(i);
                }
                let i = self.index.len() as u32;
                let v = provider.embed(token);
                assert_eq!(v.len(), provider.dim(), "provider returned a vector of the wrong size");
                self.vectors.extend(v);
                self.index.insert(token.to_owned(), i);
                Tok::Word(i)
            }
        }
    }
}

/// A token of the mention-level sequences with its binary features.
#[derive(Clone, Debug, PartialEq)]
pub struct MentionToken {
    pub token: String,
    pub features: [f64; MENTION_FEATURES],
}

fn mention_token(token: &str, feat: Option<(bool, usize)>) -> MentionToken {
    let mut features = [0.0; MENTION_FEATURES];
    if let Some((same, bucket)) = feat {
        features[0] = if same { 1.0 } else { 0.0 };
        features[1 + bucket] = 1.0;
    }
    MentionToken { token: token.to_owned(), features }
}

fn check_window(len: usize, n: usize, what: &str) -> Result<()> {
    if len > n {
        return Err(Error::Argument(format!("{what} window has {len} entries, more than {n}")));
    }
    Ok(())
}

/// Left token sequence: the padded window of `n` tokens followed by the candidate.
pub fn token_left_sequence(slot: &SlotContext, candidate: &[String], n: usize) -> Result<Vec<String>> {
    check_window(slot.left_tokens.len(), n, "left token")?;
    let mut out = vec![PAD.to_owned(); n - slot.left_tokens.len()];
    out.extend(slot.left_tokens.iter().cloned());
    out.extend(candidate.iter().cloned());
    Ok(out)
}

/// Right token sequence, read from the far end back towards the mention.
pub fn token_right_sequence(slot: &SlotContext, n: usize) -> Result<Vec<String>> {
    check_window(slot.right_tokens.len(), n, "right token")?;
    let mut out = slot.right_tokens.clone();
    out.resize(n, PAD.to_owned());
    out.reverse();
    Ok(out)
}

fn mention_slot_tokens(m: &crate::context::MentionContext) -> Vec<MentionToken> {
    let feat = Some((m.same_entity, distance_bucket(m.distance)));
    m.tokens.iter().map(|t| mention_token(t, feat)).collect()
}

/// Left mention sequence: `k` slots separated by `<sep>`, then `<sep>` and the candidate.
pub fn mention_left_sequence(slot: &SlotContext, candidate: &[String], k: usize) -> Result<Vec<MentionToken>> {
    check_window(slot.left_mentions.len(), k, "left mention")?;
    let mut out = Vec::new();
    for i in 0..k {
        if i > 0 {
            out.push(mention_token(SEP, None));
        }
        let pads = k - slot.left_mentions.len();
        if i < pads {
            out.push(mention_token(PAD, None));
        } else {
            out.extend(mention_slot_tokens(&slot.left_mentions[i - pads]));
        }
    }
    out.push(mention_token(SEP, None));
    out.extend(candidate.iter().map(|t| mention_token(t, Some((true, 0)))));
    Ok(out)
}

/// Right mention sequence, read from the far end back towards the mention.
pub fn mention_right_sequence(slot: &SlotContext, k: usize) -> Result<Vec<MentionToken>> {
    check_window(slot.right_mentions.len(), k, "right mention")?;
    let mut out = Vec::new();
    for i in 0..k {
        if i > 0 {
            out.push(mention_token(SEP, None));
        }
        match slot.right_mentions.get(i) {
            Some(m) => out.extend(mention_slot_tokens(m)),
            None => out.push(mention_token(PAD, None)),
        }
    }
    out.reverse();
    Ok(out)
}

/// Candidate features: first-or-second mention, word-length one-hot over
/// {1, 2, 3, 4, 5, >5}, used before, used for the previous mention, subject or object.
pub fn candidate_features(slot: &SlotContext, candidate: &str) -> [f64; CANDIDATE_FEATURES] {
    let mut f = [0.0; CANDIDATE_FEATURES];
    if slot.mention_index <= 1 {
        f[0] = 1.0;
    }
    let len = candidate.split_whitespace().count().max(1);
    f[len.min(6)] = 1.0;
    if slot.prior_strings.iter().any(|s| s == candidate) {
        f[7] = 1.0;
    }
    if slot.prior_strings.last().is_some_and(|s| s == candidate) {
        f[8] = 1.0;
    }
    if slot.role != Role::Other {
        f[9] = 1.0;
    }
    f
}

/// Margin loss: sum over non-gold candidates of `max(0, margin - gold + other)`.
pub fn ranking_loss(gold_score: f64, other_scores: &[f64], margin: f64) -> f64 {
    other_scores.iter().map(|s| (margin - gold_score + s).max(0.0)).sum()
}

pub(crate) struct EncodedCandidate {
    toks: Vec<Tok>,
    phi_b: [f64; CANDIDATE_FEATURES],
}

/// A slot and its candidates mapped to vocabulary ids.
pub struct Encoded {
    tok_left: Vec<Tok>,
    tok_right: Vec<Tok>,
    men_left: Vec<MTok>,
    men_right: Vec<MTok>,
    candidates: Vec<EncodedCandidate>,
}

impl Encoded {
    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }
}

fn to_mtoks(seq: &[MentionToken], vocab: &mut Vocab, provider: &dyn EmbeddingProvider) -> Vec<MTok> {
    seq.iter()
        .map(|m| {
            let tok = vocab.tok(&m.token, provider);
            let feat = if m.features.iter().all(|v| *v == 0.0) {
                None
            } else {
                let bucket = m.features[1..].iter().position(|v| *v == 1.0).unwrap_or(0);
                Some((m.features[0] == 1.0, bucket as u8))
            };
            MTok { tok, feat }
        })
        .collect()
}

struct Forward {
    tl_prefix: Option<Trace>,
    tr: Option<Trace>,
    ml_prefix: Option<Trace>,
    mr: Option<Trace>,
    cands: Vec<CandForward>,
}

struct CandForward {
    tl: Option<Trace>,
    ml: Option<Trace>,
    phi: Vec<f64>,
    z: Vec<f64>,
    score: f64,
}

/// A trained (or freshly initialized) mention ranker.
#[derive(Clone, Debug, PartialEq)]
pub struct Ranker {
    pub(crate) config: ModelConfig,
    pub(crate) provider_name: String,
    pub(crate) provider_version: String,
    pub(crate) layout: Layout,
    pub(crate) params: Vec<f64>,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    dim: usize,
    provider_name: String,
    metadata: TrainingMetadata,
}

impl Ranker {
    /// Randomly initialized model for `provider`.
    pub fn new(config: ModelConfig, provider: &dyn EmbeddingProvider) -> Result<Self> {
        config.validate()?;
        let d = provider.dim();
        let layout = Layout::new(&config, d);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = vec![0.0; layout.total];
        let mut fill = |params: &mut [f64], scale: f64| {
            for p in params.iter_mut() {
                *p = rng.gen_range(-scale..scale);
            }
        };
        fill(&mut params[..3 * d], 1.0);
        let h = config.lstm_hidden;
        for l in [layout.tok_l, layout.tok_r, layout.men_l, layout.men_r].into_iter().flatten() {
            fill(&mut params[l.w..l.b], 1.0 / (h as f64).sqrt());
            params[l.b + h..l.b + 2 * h].iter_mut().for_each(|b| *b = 1.0);
        }
        let m = config.mlp_hidden;
        fill(&mut params[layout.w_s..layout.b_s], (6.0 / (layout.feat + m) as f64).sqrt());
        fill(&mut params[layout.v_s..layout.total], (6.0 / (m + 1) as f64).sqrt());
        Ok(Ranker {
            config,
            provider_name: provider.name().to_owned(),
            provider_version: provider.version().to_owned(),
            layout,
            params,
            metadata: TrainingMetadata::default(),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn provider_version(&self) -> &str {
        &self.provider_version
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Range of the output weights `v_s` within `params`.
    pub fn output_weights_range(&self) -> std::ops::Range<usize> {
        self.layout.v_s..self.layout.total
    }

    fn check_provider(&self, provider: &dyn EmbeddingProvider) -> Result<()> {
        if provider.dim() != self.layout.d {
            return Err(Error::Model(format!(
                "model expects {}-dimensional embeddings, provider gives {}",
                self.layout.d,
                provider.dim()
            )));
        }
        Ok(())
    }

    /// Maps a slot and its candidate strings to model inputs.
    pub fn encode(
        &self,
        slot: &SlotContext,
        candidates: &[String],
        provider: &dyn EmbeddingProvider,
        vocab: &mut Vocab,
    ) -> Result<Encoded> {
        self.check_provider(provider)?;
        let (n, k) = (self.config.n, self.config.k);
        let toks = |seq: Vec<String>, vocab: &mut Vocab| seq.iter().map(|t| vocab.tok(t, provider)).collect::<Vec<_>>();
        let tok_left = toks(token_left_sequence(slot, &[], n)?, vocab);
        let tok_right = toks(token_right_sequence(slot, n)?, vocab);
        let men_left = to_mtoks(&mention_left_sequence(slot, &[], k)?, vocab, provider);
        let men_right = to_mtoks(&mention_right_sequence(slot, k)?, vocab, provider);
        let candidates = candidates
            .iter()
            .map(|c| EncodedCandidate {
                toks: toks(slot.candidate_tokens(c), vocab),
                phi_b: candidate_features(slot, c),
            })
            .collect();
        Ok(Encoded { tok_left, tok_right, men_left, men_right, candidates })
    }

    fn write_tok(&self, vocab: &Vocab, tok: Tok, out: &mut [f64]) {
        let d = self.layout.d;
        let src = match tok {
            Tok::Word(i) => &vocab.vectors[i as usize * d..(i as usize + 1) * d],
            Tok::Pad => &self.params[0..d],
            Tok::Sep => &self.params[d..2 * d],
            Tok::Unk => &self.params[2 * d..3 * d],
        };
        out[..d].copy_from_slice(src);
    }

    fn write_mtok(&self, vocab: &Vocab, m: MTok, out: &mut [f64]) {
        self.write_tok(vocab, m.tok, out);
        if self.config.features.mention_features {
            let f = &mut out[self.layout.d..];
            f.iter_mut().for_each(|v| *v = 0.0);
            if let Some((same, bucket)) = m.feat {
                f[0] = if same { 1.0 } else { 0.0 };
                f[1 + bucket as usize] = 1.0;
            }
        }
    }

    fn special_offset(&self, tok: Tok) -> Option<usize> {
        let d = self.layout.d;
        match tok {
            Tok::Word(_) => None,
            Tok::Pad => Some(0),
            Tok::Sep => Some(d),
            Tok::Unk => Some(2 * d),
        }
    }

    fn run_toks(&self, l: LstmLayout, vocab: &Vocab, toks: &[Tok], h0: &[f64], c0: &[f64]) -> Trace {
        l.forward(&self.params, toks.len(), h0, c0, |t, x| self.write_tok(vocab, toks[t], x))
    }

    fn run_mtoks(&self, l: LstmLayout, vocab: &Vocab, toks: &[MTok], h0: &[f64], c0: &[f64]) -> Trace {
        l.forward(&self.params, toks.len(), h0, c0, |t, x| self.write_mtok(vocab, toks[t], x))
    }

    fn forward(&self, enc: &Encoded, vocab: &Vocab, mask: Option<&[f64]>) -> Forward {
        let h = self.config.lstm_hidden;
        let zero = vec![0.0; h];
        let lay = &self.layout;
        let tl_prefix = lay.tok_l.map(|l| self.run_toks(l, vocab, &enc.tok_left, &zero, &zero));
        let tr = lay.tok_r.map(|l| self.run_toks(l, vocab, &enc.tok_right, &zero, &zero));
        let ml_prefix = lay.men_l.map(|l| self.run_mtoks(l, vocab, &enc.men_left, &zero, &zero));
        let mr = lay.men_r.map(|l| self.run_mtoks(l, vocab, &enc.men_right, &zero, &zero));
        let m = self.config.mlp_hidden;
        let cands = enc
            .candidates
            .iter()
            .map(|c| {
                let tl = lay.tok_l.zip(tl_prefix.as_ref()).map(|(l, p)| {
                    self.run_toks(l, vocab, &c.toks, p.last_h(h), p.last_c(h))
                });
                let ml = lay.men_l.zip(ml_prefix.as_ref()).map(|(l, p)| {
                    let mt: Vec<MTok> = c.toks.iter().map(|t| MTok { tok: *t, feat: Some((true, 0)) }).collect();
                    self.run_mtoks(l, vocab, &mt, p.last_h(h), p.last_c(h))
                });
                let mut phi = Vec::with_capacity(lay.feat);
                if let (Some(a), Some(b)) = (&tl, &tr) {
                    phi.extend_from_slice(a.last_h(h));
                    phi.extend_from_slice(b.last_h(h));
                }
                if let (Some(a), Some(b)) = (&ml, &mr) {
                    phi.extend_from_slice(a.last_h(h));
                    phi.extend_from_slice(b.last_h(h));
                }
                if self.config.features.candidate_features {
                    phi.extend_from_slice(&c.phi_b);
                }
                if let Some(mask) = mask {
                    phi.iter_mut().zip(mask).for_each(|(p, k)| *p *= k);
                }
                let mut a = self.params[lay.b_s..lay.b_s + m].to_vec();
                let w = &self.params[lay.w_s..lay.b_s];
                for (j, &pj) in phi.iter().enumerate() {
                    if pj != 0.0 {
                        for (ai, wi) in a.iter_mut().zip(&w[j * m..(j + 1) * m]) {
                            *ai += pj * wi;
                        }
                    }
                }
                let z: Vec<f64> = a.iter().map(|v| v.tanh()).collect();
                let score = dot(&self.params[lay.v_s..lay.total], &z);
                CandForward { tl, ml, phi, z, score }
            })
            .collect();
        Forward { tl_prefix, tr, ml_prefix, mr, cands }
    }

    /// Scores of every encoded candidate, dropout disabled.
    pub fn scores(&self, enc: &Encoded, vocab: &Vocab) -> Vec<f64> {
        self.forward(enc, vocab, None).cands.into_iter().map(|c| c.score).collect()
    }

    /// Score of a single candidate string in a slot.
    pub fn score(&self, candidate: &str, slot: &SlotContext, provider: &dyn EmbeddingProvider) -> Result<f64> {
        let mut vocab = Vocab::new();
        let enc = self.encode(slot, &[candidate.to_owned()], provider, &mut vocab)?;
        Ok(self.scores(&enc, &vocab)[0])
    }

    /// Loss for one example; the gradient is added to `grad` scaled by `weight`.
    pub(crate) fn loss_and_grad(
        &self,
        enc: &Encoded,
        vocab: &Vocab,
        gold: usize,
        mask: Option<&[f64]>,
        grad: &mut [f64],
        weight: f64,
    ) -> f64 {
        let fw = self.forward(enc, vocab, mask);
        let gamma = self.config.margin;
        let gold_score = fw.cands[gold].score;
        let mut loss = 0.0;
        let mut dscore = vec![0.0; fw.cands.len()];
        for (j, c) in fw.cands.iter().enumerate() {
            if j == gold {
                continue;
            }
            let term = gamma - gold_score + c.score;
            if term > 0.0 {
                loss += term;
                dscore[j] += weight;
                dscore[gold] -= weight;
            }
        }
        if dscore.iter().all(|d| *d == 0.0) {
            return loss;
        }
        let lay = &self.layout;
        let h = self.config.lstm_hidden;
        let m = self.config.mlp_hidden;
        let mut d_tl_prefix = (vec![0.0; h], vec![0.0; h]);
        let mut d_ml_prefix = (vec![0.0; h], vec![0.0; h]);
        let mut d_tr = vec![0.0; h];
        let mut d_mr = vec![0.0; h];
        let mut special_grad = vec![0.0; 3 * lay.d];
        for (j, c) in fw.cands.iter().enumerate() {
            let ds = dscore[j];
            if ds == 0.0 {
                continue;
            }
            let v = &self.params[lay.v_s..lay.total];
            let mut da = vec![0.0; m];
            for i in 0..m {
                grad[lay.v_s + i] += ds * c.z[i];
                da[i] = ds * v[i] * (1.0 - c.z[i] * c.z[i]);
                grad[lay.b_s + i] += da[i];
            }
            let w = &self.params[lay.w_s..lay.b_s];
            let mut dphi = vec![0.0; lay.feat];
            for (jf, &pj) in c.phi.iter().enumerate() {
                let col = lay.w_s + jf * m;
                if pj != 0.0 {
                    for i in 0..m {
                        grad[col + i] += pj * da[i];
                    }
                }
                dphi[jf] = dot(&w[jf * m..(jf + 1) * m], &da);
            }
            if let Some(mask) = mask {
                dphi.iter_mut().zip(mask).for_each(|(d, k)| *d *= k);
            }
            let mut off = 0;
            let cand = &enc.candidates[j];
            if let (Some(l), Some(tr)) = (lay.tok_l, &c.tl) {
                let (dh, dc) = l.backward(
                    &self.params,
                    grad,
                    tr,
                    &dphi[off..off + h],
                    &vec![0.0; h],
                    |t| self.special_offset(cand.toks[t]).is_some(),
                    |t, dx| add_special(&mut special_grad, self.special_offset(cand.toks[t]), dx, lay.d),
                );
                add(&mut d_tl_prefix.0, &dh);
                add(&mut d_tl_prefix.1, &dc);
                add(&mut d_tr, &dphi[off + h..off + 2 * h]);
                off += 2 * h;
            }
            if let (Some(l), Some(tr)) = (lay.men_l, &c.ml) {
                let (dh, dc) = l.backward(
                    &self.params,
                    grad,
                    tr,
                    &dphi[off..off + h],
                    &vec![0.0; h],
                    |t| self.special_offset(cand.toks[t]).is_some(),
                    |t, dx| add_special(&mut special_grad, self.special_offset(cand.toks[t]), dx, lay.d),
                );
                add(&mut d_ml_prefix.0, &dh);
                add(&mut d_ml_prefix.1, &dc);
                add(&mut d_mr, &dphi[off + h..off + 2 * h]);
            }
        }
        let zero = vec![0.0; h];
        if let (Some(l), Some(tr)) = (lay.tok_l, &fw.tl_prefix) {
            l.backward(
                &self.params,
                grad,
                tr,
                &d_tl_prefix.0,
                &d_tl_prefix.1,
                |t| self.special_offset(enc.tok_left[t]).is_some(),
                |t, dx| add_special(&mut special_grad, self.special_offset(enc.tok_left[t]), dx, lay.d),
            );
        }
        if let (Some(l), Some(tr)) = (lay.tok_r, &fw.tr) {
            l.backward(
                &self.params,
                grad,
                tr,
                &d_tr,
                &zero,
                |t| self.special_offset(enc.tok_right[t]).is_some(),
                |t, dx| add_special(&mut special_grad, self.special_offset(enc.tok_right[t]), dx, lay.d),
            );
        }
        if let (Some(l), Some(tr)) = (lay.men_l, &fw.ml_prefix) {
            l.backward(
                &self.params,
                grad,
                tr,
                &d_ml_prefix.0,
                &d_ml_prefix.1,
                |t| self.special_offset(enc.men_left[t].tok).is_some(),
                |t, dx| add_special(&mut special_grad, self.special_offset(enc.men_left[t].tok), dx, lay.d),
            );
        }
        if let (Some(l), Some(tr)) = (lay.men_r, &fw.mr) {
            l.backward(
                &self.params,
                grad,
                tr,
                &d_mr,
                &zero,
                |t| self.special_offset(enc.men_right[t].tok).is_some(),
                |t, dx| add_special(&mut special_grad, self.special_offset(enc.men_right[t].tok), dx, lay.d),
            );
        }
        add(&mut grad[..3 * lay.d], &special_grad);
        loss
    }

    /// Ranking loss of one slot and its gradient with respect to all parameters.
    pub fn loss_gradient(
        &self,
        slot: &SlotContext,
        candidates: &[String],
        gold: usize,
        provider: &dyn EmbeddingProvider,
    ) -> Result<(f64, Vec<f64>)> {
        if gold >= candidates.len() {
            return Err(Error::Argument("gold index out of range".into()));
        }
        let mut vocab = Vocab::new();
        let enc = self.encode(slot, candidates, provider, &mut vocab)?;
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.loss_and_grad(&enc, &vocab, gold, None, &mut grad, 1.0);
        Ok((loss, grad))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            dim: self.layout.d,
            provider_name: self.provider_name.clone(),
            metadata: self.metadata.clone(),
        };
        let c = Container {
            kind: ModelKind::Ranker,
            provider_version: self.provider_version.clone(),
            header: serde_json::to_vec(&header).map_err(|e| Error::Model(e.to_string()))?,
            blob: self.params.clone(),
        };
        Ok(c.to_bytes())
    }

    /// Loads a ranker, refusing a provider-version mismatch unless `force`.
    pub fn from_bytes(bytes: &[u8], provider_version: Option<&str>, force: bool) -> Result<Self> {
        let c = Container::from_bytes(bytes, provider_version, force)?;
        Self::from_container(c)
    }

    pub fn from_container(c: Container) -> Result<Self> {
        if c.kind != ModelKind::Ranker {
            return Err(Error::Model("model file does not contain a neural ranker".into()));
        }
        let header: Header =
            serde_json::from_slice(&c.header).map_err(|e| Error::Model(format!("bad model header: {e}")))?;
        header.config.validate()?;
        let layout = Layout::new(&header.config, header.dim);
        if layout.total != c.blob.len() {
            return Err(Error::Model(format!(
                "model has {} parameters, configuration implies {}",
                c.blob.len(),
                layout.total
            )));
        }
        Ok(Ranker {
            config: header.config,
            provider_name: header.provider_name,
            provider_version: c.provider_version,
            layout,
            params: c.blob,
            metadata: header.metadata,
        })
    }
}

fn add(a: &mut [f64], b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
}

fn add_special(special: &mut [f64], offset: Option<usize>, dx: &[f64], d: usize) {
    if let Some(o) = offset {
        add(&mut special[o..o + d], &dx[..d]);
    }
}
