//! Narrative point-of-view conversion from deictic (first/second person) to
//! anaphoric (third person) narration.
//!
//! The pipeline identifies the focus and confounding entity chains, re-conjugates
//! agreement verbs, builds candidate mention strings per entity and selects a
//! string for every mention left to right with a trained ranker.

pub mod baselines;
pub mod candidates;
pub mod container;
pub mod context;
pub mod document;
pub mod eval;
pub mod error;
pub mod format;
pub mod ingest;
pub mod morph;
pub mod pipeline;
pub mod preprocess;
pub mod pronoun;
pub mod ranker;
pub mod synth;
pub mod validate;

pub use document::{
    CaseClass, ChainId, CorefChain, DependencyArc, Document, EntityKind, EntityRole, EntitySpec,
    Gender, Mention, Number, Pov, Role, Token, TokenSpan,
};
pub use error::{Error, Result};
pub use validate::{validate_document, Violation};
