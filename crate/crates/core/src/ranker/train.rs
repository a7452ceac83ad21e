//! Adam training with early stopping on dev mention-selection accuracy.

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::embedding::EmbeddingProvider;
use super::model::{Encoded, EpochRecord, ModelConfig, Ranker, TrainingMetadata, Vocab};
use crate::error::{Error, Result};
use crate::ingest::RankingExample;

const CLIP_NORM: f64 = 5.0;

struct DevItem {
    enc: Option<Encoded>,
    gold: Option<usize>,
}

fn encode_dev(
    ranker: &Ranker,
    examples: &[RankingExample],
    provider: &dyn EmbeddingProvider,
    vocab: &mut Vocab,
) -> Result<Vec<DevItem>> {
    examples
        .iter()
        .map(|ex| {
            let idx = ex.narrowed();
            let cands: Vec<String> = idx.iter().map(|i| ex.candidate_set[*i].clone()).collect();
            let gold = cands.iter().position(|c| *c == ex.gold_string);
            let enc = if cands.len() > 1 { Some(ranker.encode(&ex.context, &cands, provider, vocab)?) } else { None };
            Ok(DevItem { enc, gold })
        })
        .collect()
}

fn dev_accuracy(ranker: &Ranker, items: &[DevItem], vocab: &Vocab) -> f64 {
    if items.is_empty() {
        return 0.0;
    }
    let correct = items
        .iter()
        .filter(|it| {
            let pick = match &it.enc {
                Some(enc) => argmax(&ranker.scores(enc, vocab)),
                None => 0,
            };
            it.gold == Some(pick)
        })
        .count();
    correct as f64 / items.len() as f64
}

/// Index of the highest score, the earliest on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// Mention-selection accuracy over case-narrowed candidate sets.
pub fn accuracy(ranker: &Ranker, examples: &[RankingExample], provider: &dyn EmbeddingProvider) -> Result<f64> {
    let mut vocab = Vocab::new();
    let items = encode_dev(ranker, examples, provider, &mut vocab)?;
    Ok(dev_accuracy(ranker, &items, &vocab))
}

fn corpus_hash(examples: &[RankingExample]) -> Result<String> {
    let bytes = serde_json::to_vec(examples).map_err(|e| Error::Training(e.to_string()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Trains a ranker on all gold/other pairs of `examples`. Early stopping watches
/// accuracy on `dev`, or on the training examples when `dev` is empty.
pub fn train(
    examples: &[RankingExample],
    config: &ModelConfig,
    provider: &dyn EmbeddingProvider,
    dev: &[RankingExample],
) -> Result<Ranker> {
    if examples.is_empty() {
        return Err(Error::Argument("no training examples".into()));
    }
    let mut ranker = Ranker::new(config.clone(), provider)?;
    let mut vocab = Vocab::new();
    let mut train_set = Vec::new();
    let mut skipped = 0usize;
    for ex in examples {
        match ex.gold_index() {
            Some(g) if ex.has_pairs() => {
                train_set.push((ranker.encode(&ex.context, &ex.candidate_set, provider, &mut vocab)?, g));
            }
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} examples without ranking pairs");
    }
    if train_set.is_empty() {
        return Err(Error::Argument("no training example has two or more candidates".into()));
    }
    let dev_source = if dev.is_empty() { examples } else { dev };
    let dev_items = encode_dev(&ranker, dev_source, provider, &mut vocab)?;

    let n_params = ranker.params.len();
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut m = vec![0.0; n_params];
    let mut v = vec![0.0; n_params];
    let mut step = 0i32;
    let mut grad = vec![0.0; n_params];
    let feat = ranker.layout.feat;
    let keep = 1.0 - config.dropout;

    let mut best_params = ranker.params.clone();
    let mut best_acc = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut history = Vec::new();
    let mut stop_reason = "max_epochs".to_owned();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.max_epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let (enc, gold) = &train_set[i];
                let mask: Option<Vec<f64>> = (config.dropout > 0.0).then(|| {
                    (0..feat).map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect()
                });
                epoch_loss += ranker.loss_and_grad(enc, &vocab, *gold, mask.as_deref(), &mut grad, w);
            }
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > CLIP_NORM {
                let s = CLIP_NORM / norm;
                grad.iter_mut().for_each(|g| *g *= s);
            }
            step += 1;
            let bc1 = 1.0 - beta1.powi(step);
            let bc2 = 1.0 - beta2.powi(step);
            let lr = config.learning_rate;
            for k in 0..n_params {
                let g = grad[k];
                if g == 0.0 && m[k] == 0.0 {
                    continue;
                }
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                ranker.params[k] -= lr * (m[k] / bc1) / ((v[k] / bc2).sqrt() + eps);
            }
        }
        let acc = dev_accuracy(&ranker, &dev_items, &vocab);
        let loss = epoch_loss / train_set.len() as f64;
        info!("epoch {epoch}: loss {loss:.4}, dev accuracy {acc:.4}");
        history.push(EpochRecord { epoch, loss, dev_accuracy: acc });
        if acc > best_acc {
            best_acc = acc;
            best_epoch = epoch;
            best_params.copy_from_slice(&ranker.params);
        }
        if config.stop_at_dev_accuracy.is_some_and(|t| acc >= t) {
            stop_reason = "target_accuracy".into();
            break;
        }
        if epoch - best_epoch >= config.patience {
            stop_reason = "patience".into();
            break;
        }
    }
    ranker.params = best_params;
    ranker.metadata = TrainingMetadata {
        corpus_hash: corpus_hash(examples)?,
        num_examples: train_set.len(),
        epochs_run: history.len(),
        best_epoch,
        best_dev_accuracy: best_acc,
        stop_reason,
        history,
    };
    Ok(ranker)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranker::HashEmbedding;

    #[test]
    fn argmax_prefers_first_on_ties() {
        assert_eq!(argmax(&[0.5, 0.5, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn empty_examples_rejected() {
        let p = HashEmbedding::default();
        assert!(matches!(train(&[], &ModelConfig::default(), &p, &[]), Err(Error::Argument(_))));
    }
}
