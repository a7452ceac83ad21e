use std::collections::BTreeSet;

use povshift::ingest::{corpus_stats, extract_corpus, extract_ranking_examples, filter_deictic_documents, load_conll_document, load_conll_documents};
use povshift::ChainId;
use proptest::prelude::*;

const SURFACES: &[&str] = &[
    "Nick", "Nick Flynn", "Flynn", "Phil", "Emily Dickinson", "he", "He", "him", "his", "himself", "the doctor",
    "The doctor", "his brother",
];

fn pos(word: &str) -> &'static str {
    match word {
        "he" | "He" | "him" | "himself" => "PRP",
        "his" => "PRP$",
        "the" | "The" => "DT",
        "doctor" | "brother" => "NN",
        _ => "NNP",
    }
}

/// One sentence per mention: the mention's words, "walked", ".".
fn conll(mentions: &[(usize, &str)]) -> String {
    let mut out = String::from("#begin document (t); part 000\n");
    for (chain, surface) in mentions {
        let words: Vec<&str> = surface.split(' ').collect();
        for (i, w) in words.iter().enumerate() {
            let coref = match (i == 0, i + 1 == words.len()) {
                (true, true) => format!("({chain})"),
                (true, false) => format!("({chain}"),
                (false, true) => format!("{chain})"),
                _ => "-".into(),
            };
            let ne = if pos(w) == "NNP" { "(PERSON)" } else { "*" };
            out.push_str(&format!("t\t0\t{i}\t{w}\t{}\t*\t-\t-\t-\t-\t{ne}\t{coref}\n", pos(w)));
        }
        let n = words.len();
        out.push_str(&format!("t\t0\t{n}\twalked\tVBD\t*\twalk\t-\t-\t-\t*\t-\n"));
        out.push_str(&format!("t\t0\t{}\t.\t.\t*\t-\t-\t-\t-\t*\t-\n\n", n + 1));
    }
    out.push_str("#end document\n");
    out
}

/// Unique mention strings, pronoun- and determiner-initial ones lowercased.
fn brute_force(mentions: &[(usize, &str)], chain: usize) -> BTreeSet<String> {
    mentions
        .iter()
        .filter(|(c, _)| *c == chain)
        .map(|(_, s)| {
            let first = s.split(' ').next().unwrap().to_lowercase();
            if ["he", "him", "his", "himself", "the"].contains(&first.as_str()) {
                let mut chars = s.chars();
                let f = chars.next().unwrap();
                f.to_lowercase().chain(chars).collect()
            } else {
                s.to_string()
            }
        })
        .collect()
}

fn chains() -> impl Strategy<Value = Vec<(usize, &'static str)>> {
    prop::collection::vec((0usize..3, prop::sample::select(SURFACES)), 1..16)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn candidate_sets_match_brute_force(mentions in chains()) {
        let doc = load_conll_document(&conll(&mentions)).unwrap();
        for chain in mentions.iter().map(|m| m.0).collect::<BTreeSet<_>>() {
            let id = ChainId::new(chain.to_string());
            let examples = extract_ranking_examples(&doc, &id, 5, 3);
            let expected = brute_force(&mentions, chain);
            prop_assert_eq!(examples.len(), mentions.iter().filter(|m| m.0 == chain).count());
            for ex in &examples {
                let got: BTreeSet<String> = ex.candidate_set.iter().cloned().collect();
                prop_assert_eq!(got.len(), ex.candidate_set.len());
                prop_assert_eq!(&got, &expected);
                prop_assert!(ex.gold_index().is_some());
            }
        }
    }
}

#[test]
fn hand_built_file() {
    let mentions = [(0, "Nick Flynn"), (1, "Phil"), (0, "He"), (0, "his brother"), (1, "him"), (0, "Nick")];
    let doc = load_conll_document(&conll(&mentions)).unwrap();
    let nick = extract_ranking_examples(&doc, &ChainId::new("0"), 5, 3);
    assert_eq!(nick.len(), 4);
    assert_eq!(nick[0].candidate_set, ["Nick", "Nick Flynn", "he", "his brother"]);
    let golds: Vec<&str> = nick.iter().map(|e| e.gold_string.as_str()).collect();
    assert_eq!(golds, ["Nick Flynn", "he", "his brother", "Nick"]);
    let phil = extract_ranking_examples(&doc, &ChainId::new("1"), 5, 3);
    assert_eq!(phil[0].candidate_set, ["Phil", "him"]);
    assert!(extract_ranking_examples(&doc, &ChainId::new("9"), 5, 3).is_empty());
}

#[test]
fn deictic_documents_are_filtered() {
    let third = conll(&[(0, "Phil"), (0, "he")]);
    let first = conll(&[(0, "Phil")]).replace("walked", "I");
    let text = format!("{third}{}", first.replace("(t)", "(u)").replace("\nt\t", "\nu\t"));
    let docs = load_conll_documents(&text).unwrap();
    assert_eq!(docs.len(), 2);
    let kept = filter_deictic_documents(docs);
    assert_eq!(kept.len(), 1);
    let stats = corpus_stats(&kept);
    assert_eq!((stats.num_entities, stats.num_mentions, stats.num_docs), (1, 2, 1));
    assert_eq!(extract_corpus(&kept, 5, 3).len(), 2);
}
