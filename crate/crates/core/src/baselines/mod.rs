//! Comparison systems: random choice, pronouns only, the most common gold string, and
//! tree-based classifiers over hand-built features.

mod features;
mod tree;

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use features::{tree_features, TREE_FEATURES};
pub use tree::{train_tree_ranker, Tree, TreeConfig, TreeModel, TreeVariant};

use crate::candidates::{canonicalize, Candidate, CandidateSource};
use crate::document::{CaseClass, ChainId, Gender, Number};
use crate::error::{Error, Result};
use crate::pipeline::{MentionSelector, SelectionInput};
use crate::pronoun;
use crate::ranker::EmbeddingProvider;

/// Uniform draw from `candidates`.
pub fn random_select<'a, R: Rng>(candidates: &'a [String], rng: &mut R) -> Result<&'a str> {
    if candidates.is_empty() {
        return Err(Error::Argument("cannot select from an empty candidate set".into()));
    }
    Ok(&candidates[rng.gen_range(0..candidates.len())])
}

/// The third-person pronoun agreeing with the entity and the original case. Falls
/// back to the first candidate when no candidate matches; the flag reports that.
pub fn only_pronouns_select(
    candidates: &[Candidate],
    case: CaseClass,
    gender: Gender,
    number: Number,
) -> Result<(String, bool)> {
    let first = candidates
        .first()
        .ok_or_else(|| Error::Argument("cannot select from an empty candidate set".into()))?;
    let wanted = match number {
        Number::Plural => pronoun::third_plural(case),
        _ => pronoun::third_singular(gender, case),
    };
    match wanted.and_then(|w| candidates.iter().find(|c| c.string == w)) {
        Some(c) => Ok((c.string.clone(), false)),
        None => Ok((first.string.clone(), true)),
    }
}

/// The most frequent string among the gold strings of a chain, ties broken by
/// canonical candidate order.
pub fn most_common_select(gold_chain_strings: &[String]) -> Result<String> {
    if gold_chain_strings.is_empty() {
        return Err(Error::Argument("no gold strings for the chain".into()));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for s in gold_chain_strings {
        *counts.entry(s.as_str()).or_default() += 1;
    }
    let max = *counts.values().max().expect("non-empty");
    let tied: Vec<Candidate> = counts
        .iter()
        .filter(|(_, c)| **c == max)
        .map(|(s, _)| Candidate::new(*s, CandidateSource::ChainString))
        .collect();
    Ok(canonicalize(tied).remove(0).string)
}

/// Which baseline to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Baseline {
    Random,
    Pronouns,
    MostCommon,
    Tree,
    Forest,
    Gbt,
}

impl Baseline {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "random" => Baseline::Random,
            "pronouns" => Baseline::Pronouns,
            "most-common" => Baseline::MostCommon,
            "tree" => Baseline::Tree,
            "forest" => Baseline::Forest,
            "gbt" => Baseline::Gbt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Random => "random",
            Baseline::Pronouns => "pronouns",
            Baseline::MostCommon => "most-common",
            Baseline::Tree => "tree",
            Baseline::Forest => "forest",
            Baseline::Gbt => "gbt",
        }
    }

    pub fn tree_variant(self) -> Option<TreeVariant> {
        match self {
            Baseline::Tree => Some(TreeVariant::SingleTree),
            Baseline::Forest => Some(TreeVariant::RandomForest),
            Baseline::Gbt => Some(TreeVariant::GradientBoosted),
            _ => None,
        }
    }
}

pub struct RandomSelector {
    rng: ChaCha8Rng,
}

impl RandomSelector {
    pub fn new(seed: u64) -> Self {
        RandomSelector { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl MentionSelector for RandomSelector {
    fn select(&mut self, input: &SelectionInput<'_>) -> Result<String> {
        let strings: Vec<String> = input.candidates.iter().map(|c| c.string.clone()).collect();
        random_select(&strings, &mut self.rng).map(str::to_owned)
    }
}

pub struct PronounSelector;

impl MentionSelector for PronounSelector {
    fn select(&mut self, input: &SelectionInput<'_>) -> Result<String> {
        let (s, fallback) =
            only_pronouns_select(input.candidates, input.slot.case, input.entity.gender, input.entity.number)?;
        if fallback {
            log::debug!("no agreeing pronoun for {:?}; using {s:?}", input.mention.string);
        }
        Ok(s)
    }
}

/// Oracle baseline: needs the gold strings of every chain.
pub struct MostCommonSelector {
    by_chain: HashMap<ChainId, String>,
}

impl MostCommonSelector {
    pub fn new(gold: &HashMap<ChainId, Vec<String>>) -> Result<Self> {
        let by_chain = gold
            .iter()
            .map(|(id, strings)| Ok((id.clone(), most_common_select(strings)?)))
            .collect::<Result<_>>()?;
        Ok(MostCommonSelector { by_chain })
    }
}

impl MentionSelector for MostCommonSelector {
    fn select(&mut self, input: &SelectionInput<'_>) -> Result<String> {
        match self.by_chain.get(&input.entity.chain_id) {
            Some(s) => Ok(s.clone()),
            None => Err(Error::Argument(format!("no gold strings for chain {}", input.entity.chain_id))),
        }
    }
}

/// Highest positive-class probability among the narrowed candidates.
pub struct TreeSelector<'a> {
    pub model: &'a TreeModel,
    pub provider: &'a dyn EmbeddingProvider,
}

impl MentionSelector for TreeSelector<'_> {
    fn select(&mut self, input: &SelectionInput<'_>) -> Result<String> {
        let strings: Vec<String> = input.candidates.iter().map(|c| c.string.clone()).collect();
        let i = self.model.select(input.slot, &strings, self.provider)?;
        Ok(strings[i].clone())
    }
}
