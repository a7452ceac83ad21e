use povshift::ingest::RankingExample;
use povshift::pipeline::{gold_ranking_examples, plan_conversion, Resources};
use povshift::ranker::{ranking_loss, EmbeddingProvider, HashEmbedding, ModelConfig, Ranker};
use povshift::synth::{generate_corpus, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn examples(n: usize, k: usize) -> Vec<RankingExample> {
    let res = Resources::builtin();
    let corpus = generate_corpus(&SynthConfig { num_docs: 3, seed: 21, ..Default::default() }).unwrap();
    let mut out = Vec::new();
    for d in &corpus {
        let (spec, pov) = d.focus_spec().unwrap();
        let plan = plan_conversion(&d.doc, &spec, pov, &res).unwrap();
        out.extend(gold_ranking_examples(d, &plan, n, k));
    }
    out.retain(|e| e.has_pairs());
    out
}

fn tiny(seed: u64) -> ModelConfig {
    ModelConfig { n: 3, k: 2, lstm_hidden: 3, mlp_hidden: 4, margin: 0.5, seed, ..Default::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn loss_is_non_negative(gold in -5.0f64..5.0, others in prop::collection::vec(-5.0f64..5.0, 0..8), margin in 0.01f64..2.0) {
        prop_assert!(ranking_loss(gold, &others, margin) >= 0.0);
    }

    #[test]
    fn loss_is_zero_iff_margin_holds(gold in -5.0f64..5.0, others in prop::collection::vec(-5.0f64..5.0, 1..8), margin in 0.01f64..2.0) {
        let separated = others.iter().all(|s| gold - s >= margin);
        prop_assert_eq!(ranking_loss(gold, &others, margin) == 0.0, separated);
    }

    #[test]
    fn loss_ignores_candidate_order(gold in -5.0f64..5.0, others in prop::collection::vec(-5.0f64..5.0, 0..8), margin in 0.01f64..2.0, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = others.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = ranking_loss(gold, &others, margin);
        let b = ranking_loss(gold, &shuffled, margin);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn gradient_matches_central_differences() {
    let p = HashEmbedding::new(4);
    let exs = examples(3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for draw in 0..100 {
        let ex = &exs[rng.gen_range(0..exs.len())];
        let mut cands = ex.candidate_set.clone();
        cands.truncate(rng.gen_range(2..=4).min(cands.len()));
        let gold = rng.gen_range(0..cands.len());
        let mut r = Ranker::new(tiny(draw), &p).unwrap();
        let v = r.output_weights_range();
        r.params_mut()[v].iter_mut().for_each(|x| *x *= 0.1);
        let (_, grad) = r.loss_gradient(&ex.context, &cands, gold, &p).unwrap();
        let mut numeric = vec![0.0; grad.len()];
        for i in 0..grad.len() {
            let orig = r.params()[i];
            r.params_mut()[i] = orig + h;
            let up = r.loss_gradient(&ex.context, &cands, gold, &p).unwrap().0;
            r.params_mut()[i] = orig - h;
            let down = r.loss_gradient(&ex.context, &cands, gold, &p).unwrap().0;
            r.params_mut()[i] = orig;
            numeric[i] = (up - down) / (2.0 * h);
        }
        let diff = grad.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(numeric.iter().map(|a| a * a).sum::<f64>().sqrt());
        let rel = if scale == 0.0 { 0.0 } else { diff / scale };
        worst = worst.max(rel);
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn zero_output_weights_give_zero_scores() {
    let p = HashEmbedding::default();
    for (i, ex) in examples(50, 10).iter().take(20).enumerate() {
        let mut r = Ranker::new(ModelConfig { seed: i as u64, ..Default::default() }, &p).unwrap();
        let v = r.output_weights_range();
        r.params_mut()[v].iter_mut().for_each(|x| *x = 0.0);
        for c in &ex.candidate_set {
            assert_eq!(r.score(c, &ex.context, &p).unwrap(), 0.0);
        }
    }
}

#[test]
fn provider_mismatch_refused_unless_forced() {
    let p = HashEmbedding::new(4);
    let bytes = Ranker::new(tiny(1), &p).unwrap().to_bytes().unwrap();
    let other = HashEmbedding::new(8);
    assert!(Ranker::from_bytes(&bytes, Some(other.version()), false).is_err());
    assert!(Ranker::from_bytes(&bytes, Some(other.version()), true).is_ok());
}
