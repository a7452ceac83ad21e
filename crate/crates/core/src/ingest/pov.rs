//! Benchmark documents with gold conversions.

use serde::{Deserialize, Serialize};

use crate::document::{Document, EntitySpec, Pov};
use crate::error::{Error, Result};
use crate::format::{DocumentRecord, FocusRecord, GoldReplacement, GoldVerbChange};
use crate::validate::validate_document;
use crate::EntityRole;

/// Gold mention strings and verb forms.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEdits {
    pub replacements: Vec<GoldReplacement>,
    pub verb_changes: Vec<GoldVerbChange>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PovDocument {
    pub doc: Document,
    pub focus: Option<FocusRecord>,
    pub gold: GoldEdits,
}

impl PovDocument {
    pub fn focus_spec(&self) -> Option<(EntitySpec, Pov)> {
        self.focus.as_ref().map(|f| {
            (
                EntitySpec {
                    role: EntityRole::Focus,
                    gender: f.gender,
                    full_name: f.full_name.clone(),
                    given_name: f.given_name.clone(),
                    family_name: f.family_name.clone(),
                },
                f.from_pov,
            )
        })
    }

    pub fn to_json(&self) -> String {
        let mut record = DocumentRecord::from_document(&self.doc);
        record.focus = self.focus.clone();
        record.gold_replacements = self.gold.replacements.clone();
        record.gold_verb_changes = self.gold.verb_changes.clone();
        serde_json::to_string_pretty(&record).expect("document records always serialize")
    }
}

/// Parses and validates a benchmark document. Gold replacements must sit on a
/// mention of the named chain and verb changes on a token.
pub fn load_pov_document(json: &str) -> Result<PovDocument> {
    let record: DocumentRecord = serde_json::from_str(json).map_err(|e| Error::Schema {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let focus = record.focus.clone();
    let gold = GoldEdits {
        replacements: record.gold_replacements.clone(),
        verb_changes: record.gold_verb_changes.clone(),
    };
    let doc = record.into_document()?;
    if let Some(v) = validate_document(&doc).into_iter().next() {
        return Err(Error::Schema {
            path: v.field,
            message: v.message,
        });
    }
    for (i, r) in gold.replacements.iter().enumerate() {
        let ok = doc
            .chain(&r.chain_id)
            .is_some_and(|c| c.mentions.iter().any(|m| m.span == r.span));
        if !ok {
            return Err(Error::Schema {
                path: format!("gold_replacements[{i}]"),
                message: format!(
                    "no mention [{}, {}] in chain {}",
                    r.span.start, r.span.end, r.chain_id
                ),
            });
        }
        if r.string.trim().is_empty() {
            return Err(Error::Schema {
                path: format!("gold_replacements[{i}].string"),
                message: "empty replacement".into(),
            });
        }
    }
    for (i, v) in gold.verb_changes.iter().enumerate() {
        if v.token >= doc.tokens.len() || v.string.trim().is_empty() {
            return Err(Error::Schema {
                path: format!("gold_verb_changes[{i}]"),
                message: format!("invalid verb change at token {}", v.token),
            });
        }
    }
    if let Some(f) = &focus {
        if f.from_pov == Pov::Third {
            return Err(Error::Schema {
                path: "focus.from_pov".into(),
                message: "original point of view must be first or second".into(),
            });
        }
    }
    Ok(PovDocument { doc, focus, gold })
}
