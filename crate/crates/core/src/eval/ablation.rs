//! Trains one ranker per feature configuration and compares them.

use log::info;
use serde::{Deserialize, Serialize};

use super::{evaluate_document, paired_t_test, ScoreReport};
use crate::error::{Error, Result};
use crate::ingest::{PovDocument, RankingExample};
use crate::pipeline::{RankerSelector, Resources};
use crate::ranker::{train, EmbeddingProvider, FeatureSet, ModelConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub label: String,
    pub features: FeatureSet,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
    /// Per evaluation document, averaged over seeds.
    pub per_doc_f1: Vec<f64>,
    /// Slot-weighted mention-selection accuracy per seed.
    pub per_seed_accuracy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
    /// `(a, b, p)`: one-tailed p that row a beats row b on per-document F1.
    pub tests: Vec<(String, String, f64)>,
}

impl AblationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,precision,recall,f1,accuracy\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.2},{:.2},{:.2},{:.2}\n",
                r.label,
                100.0 * r.precision,
                100.0 * r.recall,
                100.0 * r.f1,
                100.0 * r.accuracy
            ));
        }
        out
    }

    pub fn tests_csv(&self) -> String {
        let mut out = String::from("model_a,model_b,p_value\n");
        for (a, b, p) in &self.tests {
            out.push_str(&format!("{a},{b},{p:.6e}\n"));
        }
        out
    }
}

/// For every feature set and seed: train on `examples`, stop early on `dev`, and run
/// the pipeline over `eval_docs`. Metrics are averaged over seeds.
#[allow(clippy::too_many_arguments)]
pub fn ablation_run(
    variants: &[FeatureSet],
    seeds: &[u64],
    config: &ModelConfig,
    examples: &[RankingExample],
    dev: &[RankingExample],
    eval_docs: &[PovDocument],
    provider: &dyn EmbeddingProvider,
    res: &Resources,
) -> Result<AblationReport> {
    if variants.is_empty() || seeds.is_empty() || eval_docs.is_empty() {
        return Err(Error::Argument("an ablation needs variants, seeds and evaluation documents".into()));
    }
    let mut rows = Vec::new();
    for features in variants {
        let mut cfg = config.clone();
        cfg.features = *features;
        cfg.validate()?;
        let label = features.label();
        let mut per_doc = vec![0.0; eval_docs.len()];
        let (mut p, mut r, mut f, mut acc) = (0.0, 0.0, 0.0, 0.0);
        let mut per_seed = Vec::new();
        for seed in seeds {
            cfg.seed = *seed;
            info!("ablation {label}, seed {seed}");
            let ranker = train(examples, &cfg, provider, dev)?;
            let mut reports = Vec::new();
            let (mut correct, mut slots) = (0.0, 0usize);
            for (i, doc) in eval_docs.iter().enumerate() {
                let mut sel = RankerSelector { ranker: &ranker, provider };
                let e = evaluate_document(doc, res, &mut sel, cfg.n, cfg.k)?;
                per_doc[i] += e.report.f1 / seeds.len() as f64;
                correct += e.accuracy * e.slots as f64;
                slots += e.slots;
                reports.push(e.report);
            }
            let all = ScoreReport::combine(&reports);
            let a = if slots == 0 { 0.0 } else { correct / slots as f64 };
            p += all.precision;
            r += all.recall;
            f += all.f1;
            acc += a;
            per_seed.push(a);
        }
        let s = seeds.len() as f64;
        rows.push(AblationRow {
            label,
            features: *features,
            precision: p / s,
            recall: r / s,
            f1: f / s,
            accuracy: acc / s,
            per_doc_f1: per_doc,
            per_seed_accuracy: per_seed,
        });
    }
    let mut tests = Vec::new();
    if eval_docs.len() >= 2 {
        for (i, a) in rows.iter().enumerate() {
            for b in rows.iter().skip(i + 1) {
                tests.push((a.label.clone(), b.label.clone(), paired_t_test(&a.per_doc_f1, &b.per_doc_f1)?));
            }
        }
    }
    Ok(AblationReport { seeds: seeds.to_vec(), rows, tests })
}
