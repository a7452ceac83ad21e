//! English personal pronoun inventory.

use crate::document::{CaseClass, Gender, Number};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Person {
    First,
    Second,
    Third,
}

#[derive(Debug, PartialEq, Eq)]
pub struct PronounInfo {
    pub form: &'static str,
    pub person: Person,
    /// `None` when the form does not fix number ("you").
    pub number: Option<Number>,
    pub gender: Gender,
    pub cases: &'static [CaseClass],
    /// Refers to humans only; "it" and "they" are excluded.
    pub human: bool,
}

use CaseClass::{Accusative as Acc, Nominative as Nom, Possessive as Poss, Reflexive as Refl};
use Gender::{Feminine as F, Masculine as M, Unknown as U};
use Number::{Plural as Pl, Singular as Sg};
use Person::{First as P1, Second as P2, Third as P3};

macro_rules! p {
    ($form:expr, $person:expr, $number:expr, $gender:expr, [$($case:expr),+], $human:expr) => {
        PronounInfo {
            form: $form,
            person: $person,
            number: $number,
            gender: $gender,
            cases: &[$($case),+],
            human: $human,
        }
    };
}

pub static PRONOUNS: &[PronounInfo] = &[
    p!("i", P1, Some(Sg), U, [Nom], true),
    p!("me", P1, Some(Sg), U, [Acc], true),
    p!("my", P1, Some(Sg), U, [Poss], true),
    p!("mine", P1, Some(Sg), U, [Poss], true),
    p!("myself", P1, Some(Sg), U, [Refl], true),
    p!("we", P1, Some(Pl), U, [Nom], true),
    p!("us", P1, Some(Pl), U, [Acc], true),
    p!("our", P1, Some(Pl), U, [Poss], true),
    p!("ours", P1, Some(Pl), U, [Poss], true),
    p!("ourselves", P1, Some(Pl), U, [Refl], true),
    p!("you", P2, None, U, [Nom, Acc], true),
    p!("your", P2, None, U, [Poss], true),
    p!("yours", P2, None, U, [Poss], true),
    p!("yourself", P2, Some(Sg), U, [Refl], true),
    p!("yourselves", P2, Some(Pl), U, [Refl], true),
    p!("he", P3, Some(Sg), M, [Nom], true),
    p!("him", P3, Some(Sg), M, [Acc], true),
    p!("his", P3, Some(Sg), M, [Poss], true),
    p!("himself", P3, Some(Sg), M, [Refl], true),
    p!("she", P3, Some(Sg), F, [Nom], true),
    p!("her", P3, Some(Sg), F, [Acc, Poss], true),
    p!("hers", P3, Some(Sg), F, [Poss], true),
    p!("herself", P3, Some(Sg), F, [Refl], true),
    p!("he himself", P3, Some(Sg), M, [Nom], true),
    p!("she herself", P3, Some(Sg), F, [Nom], true),
    p!("it", P3, Some(Sg), U, [Nom, Acc], false),
    p!("its", P3, Some(Sg), U, [Poss], false),
    p!("itself", P3, Some(Sg), U, [Refl], false),
    p!("they", P3, Some(Pl), U, [Nom], false),
    p!("them", P3, Some(Pl), U, [Acc], false),
    p!("their", P3, Some(Pl), U, [Poss], false),
    p!("theirs", P3, Some(Pl), U, [Poss], false),
    p!("themselves", P3, Some(Pl), U, [Refl], false),
];

/// Looks up a pronoun form, case-insensitively.
pub fn lookup(form: &str) -> Option<&'static PronounInfo> {
    let lower = form.trim().to_lowercase();
    PRONOUNS.iter().find(|p| p.form == lower)
}

pub fn is_pronoun(form: &str) -> bool {
    lookup(form).is_some()
}

/// First- or second-person pronoun.
pub fn is_deictic(form: &str) -> bool {
    lookup(form).is_some_and(|p| p.person != Person::Third)
}

/// Third-person singular gendered pronoun for a case class.
pub fn third_singular(gender: Gender, case: CaseClass) -> Option<&'static str> {
    let forms = match gender {
        Gender::Masculine => ["he", "him", "his", "himself"],
        Gender::Feminine => ["she", "her", "her", "herself"],
        Gender::Unknown => return None,
    };
    match case {
        CaseClass::Nominative => Some(forms[0]),
        CaseClass::Accusative => Some(forms[1]),
        CaseClass::Possessive => Some(forms[2]),
        CaseClass::Reflexive => Some(forms[3]),
        CaseClass::NonPronominal => None,
    }
}

pub fn third_plural(case: CaseClass) -> Option<&'static str> {
    match case {
        CaseClass::Nominative => Some("they"),
        CaseClass::Accusative => Some("them"),
        CaseClass::Possessive => Some("their"),
        CaseClass::Reflexive => Some("themselves"),
        CaseClass::NonPronominal => None,
    }
}

/// Gendered third-person inventory: bare forms plus the emphatic nominative.
pub fn gendered_inventory(gender: Gender) -> &'static [&'static str] {
    match gender {
        Gender::Masculine => &["he", "him", "his", "himself", "he himself"],
        Gender::Feminine => &["she", "her", "herself", "she herself"],
        Gender::Unknown => &[],
    }
}

pub const PLURAL_INVENTORY: [&str; 5] = ["they", "them", "their", "theirs", "themselves"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_is_case_insensitive() {
        assert_eq!(lookup("I").unwrap().person, Person::First);
        assert_eq!(lookup("His").unwrap().gender, Gender::Masculine);
        assert!(lookup("Nick").is_none());
    }

    #[test]
    fn deixis() {
        assert!(is_deictic("you"));
        assert!(is_deictic("ourselves"));
        assert!(!is_deictic("they"));
    }

    #[test]
    fn feminine_inventory_has_no_duplicate_her() {
        let inv = gendered_inventory(Gender::Feminine);
        assert_eq!(inv.iter().filter(|f| **f == "her").count(), 1);
    }
}
