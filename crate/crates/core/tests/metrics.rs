use povshift::eval::human::{aggregate_scores, parse_ratings, referential_percent, referential_score, score_ratings};
use povshift::eval::{mention_selection_accuracy, paired_t_test, prf};
use povshift::format::GoldReplacement;
use povshift::{ChainId, TokenSpan};

/// Gamma at integer and half-integer points.
fn gamma_half(x: f64) -> f64 {
    if (x - 1.0).abs() < 1e-12 {
        1.0
    } else if (x - 0.5).abs() < 1e-12 {
        std::f64::consts::PI.sqrt()
    } else {
        (x - 1.0) * gamma_half(x - 1.0)
    }
}

/// P(T > t) for Student's t with `df` degrees of freedom, by Simpson integration
/// of the density from 0 to t.
fn t_sf(t: f64, df: f64) -> f64 {
    let c = gamma_half((df + 1.0) / 2.0) / ((df * std::f64::consts::PI).sqrt() * gamma_half(df / 2.0));
    let pdf = |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    let n = 20_000;
    let h = t / n as f64;
    let mut s = pdf(0.0) + pdf(t);
    for i in 1..n {
        s += pdf(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 - s * h / 3.0
}

fn oracle_p(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let sd = (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    t_sf(mean / (sd / n.sqrt()), n - 1.0)
}

#[test]
fn t_test_against_numeric_oracle() {
    let a = [0.72, 0.75, 0.71, 0.74];
    let b = [0.70, 0.71, 0.70, 0.72];
    let p = paired_t_test(&a, &b).unwrap();
    assert!((p - oracle_p(&a, &b)).abs() < 1e-6, "{p} vs {}", oracle_p(&a, &b));
    let a = [0.81, 0.79, 0.85, 0.80, 0.77, 0.83];
    let b = [0.80, 0.80, 0.81, 0.78, 0.78, 0.79];
    assert!((paired_t_test(&a, &b).unwrap() - oracle_p(&a, &b)).abs() < 1e-6);
}

#[test]
fn t_test_conventions() {
    let a = [0.7, 0.6, 0.8];
    assert_eq!(paired_t_test(&a, &a).unwrap(), 1.0);
    let b: Vec<f64> = a.iter().map(|x| x - 0.05).collect();
    assert!(paired_t_test(&a, &b).unwrap() < 1e-12);
    assert!(paired_t_test(&a, &b[..2]).is_err());
}

#[test]
fn precision_recall_examples() {
    let (p, r, f) = prf(10, 7, 14);
    assert!((p - 0.7).abs() < 1e-12 && (r - 0.5).abs() < 1e-12);
    assert!((f - 2.0 * 0.7 * 0.5 / 1.2).abs() < 1e-12);
    assert_eq!(prf(0, 0, 5), (0.0, 0.0, 0.0));
}

fn slot(i: usize, s: &str) -> GoldReplacement {
    GoldReplacement { chain_id: ChainId::new("1"), span: TokenSpan::new(i, i), string: s.into() }
}

#[test]
fn selection_accuracy_examples() {
    let gold = [slot(0, "Nick"), slot(1, "he"), slot(2, "his"), slot(3, "him")];
    let pred = [slot(0, "Nick"), slot(1, "he"), slot(2, "his"), slot(3, "Nick")];
    assert_eq!(mention_selection_accuracy(&pred, &gold), 0.75);
    assert_eq!(mention_selection_accuracy(&[slot(0, "nick")], &[slot(0, "Nick")]), 0.0);
}

#[test]
fn ratings_csv_end_to_end() {
    let csv = "worker,sentence,mention,amb,correct,nat\n\
               w1,s1,m1,2,1,2\n\
               w1,s1,m2,2,1,2\n\
               w2,s1,m1,1,1,1\n\
               w2,s1,m2,2,0,1\n\
               w1,s2,m1,impossible,,0\n";
    let ratings = parse_ratings(csv).unwrap();
    assert_eq!(referential_score(&ratings[..2]).unwrap(), 2.0);
    assert_eq!(referential_score(&ratings[2..4]).unwrap(), -0.5);
    assert_eq!(referential_score(&ratings[4..]).unwrap(), -2.0);
    assert_eq!(aggregate_scores(&[(2.0, 2.0); 5]).unwrap().0, 2.0);
    assert_eq!(aggregate_scores(&[(1.0, 0.0), (-1.0, 0.0)]).unwrap().0, 0.0);
    assert!((referential_percent(1.24) - 81.0).abs() < 1e-4);
    let report = score_ratings(&ratings).unwrap();
    assert_eq!(report.sentences.len(), 2);
    assert!(parse_ratings("worker,sentence,mention,amb,correct,nat\nw,s,m,3,1,1\n").is_err());
    assert!(parse_ratings("worker,sentence,amb\n").is_err());
}
