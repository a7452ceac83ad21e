use povshift::morph::{conjugate_third_singular, Conjugator, RuleUsed, Tense};

fn tense(name: &str) -> Tense {
    match name {
        "past" => Tense::Past,
        "present" => Tense::Present,
        other => panic!("unknown tense {other}"),
    }
}

/// (form, lemma, tense, expected) rows of tests/data/conjugation.tsv.
fn table() -> Vec<(String, String, Tense, String)> {
    include_str!("data/conjugation.tsv")
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0].to_owned(), f[1].to_owned(), tense(f[2]), f[3].to_owned())
        })
        .collect()
}

#[test]
fn sixty_item_table() {
    let table = table();
    assert_eq!(table.len(), 60);
    let failures: Vec<String> = table
        .iter()
        .filter_map(|(form, lemma, tense, want)| {
            let got = conjugate_third_singular(form, lemma, *tense).unwrap();
            (got != *want).then(|| format!("{form} -> {got}, expected {want}"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn every_rule_is_exercised() {
    let c = Conjugator::default();
    let mut seen = Vec::new();
    for (form, lemma, tense, _) in &table() {
        seen.push(c.conjugate(form, lemma, *tense).unwrap().1);
    }
    for rule in [RuleUsed::Dictionary, RuleUsed::Irregular, RuleUsed::SuffixRule, RuleUsed::Unchanged] {
        assert!(seen.contains(&rule), "{rule:?} never used");
    }
}

#[test]
fn suffix_rows_do_not_depend_on_the_dictionary() {
    let c = Conjugator::default();
    for form in ["buzz", "echo", "envy", "box", "raise", "convey", "tidy", "sketch"] {
        assert_eq!(c.conjugate(form, form, Tense::Present).unwrap().1, RuleUsed::SuffixRule, "{form}");
    }
}

#[test]
fn capitalization_is_kept() {
    assert_eq!(conjugate_third_singular("Drive", "drive", Tense::Present).unwrap(), "Drives");
    assert_eq!(conjugate_third_singular("AM", "be", Tense::Present).unwrap(), "IS");
}

#[test]
fn empty_form_is_an_error() {
    assert!(conjugate_third_singular(" ", "x", Tense::Present).is_err());
}
