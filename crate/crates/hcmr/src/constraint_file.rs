//! TOML constraint files for model interventions.
//!
//! ```toml
//! force_source = [0, 1]
//! force_sink = [6]
//! forbid_parent = [[3, 4]]      # [child, parent]
//! allow_parent = [[2, 0]]
//! pin_injected_selection = true
//!
//! [[clamp]]
//! concept = 2
//! rule = 0
//! literal = 1
//! role = "N"                    # P, N or I
//!
//! [[inject_rules]]
//! concept = 2
//! body = "C0 & !C1"             # "." for the empty body
//!
//! [[priorities]]
//! concept = 0
//! value = 4.0
//!
//! [[priorities]]
//! concept = 2
//! reference = 0
//! offset = -1.0
//! ```

use std::path::Path;

use hcmr_core::constraints::{ConstraintSpec, InjectedRule, Literal, PriorityAssignment, PriorityValue, RoleClamp};
use hcmr_core::Role;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{self, FormatError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct File {
    #[serde(default)]
    force_source: Vec<usize>,
    #[serde(default)]
    force_sink: Vec<usize>,
    #[serde(default)]
    forbid_parent: Vec<[usize; 2]>,
    #[serde(default)]
    allow_parent: Vec<[usize; 2]>,
    #[serde(default)]
    pin_injected_selection: bool,
    #[serde(default)]
    clamp: Vec<ClampEntry>,
    #[serde(default)]
    inject_rules: Vec<InjectEntry>,
    #[serde(default)]
    priorities: Vec<PriorityEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClampEntry {
    concept: usize,
    rule: usize,
    literal: usize,
    role: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectEntry {
    concept: usize,
    body: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorityEntry {
    concept: usize,
    value: Option<f64>,
    reference: Option<usize>,
    offset: Option<f64>,
}

/// Parses a constraint document. Index validation against a model happens
/// later, in [`hcmr_core::ConstraintSet::new`].
pub fn parse_constraints(text: &str) -> Result<ConstraintSpec> {
    let f: File = toml::from_str(text)?;
    let mut spec = ConstraintSpec {
        force_source: f.force_source,
        force_sink: f.force_sink,
        forbid_parent: f.forbid_parent.into_iter().map(|[c, p]| (c, p)).collect(),
        allow_parent: f.allow_parent.into_iter().map(|[c, p]| (c, p)).collect(),
        pin_injected_selection: f.pin_injected_selection,
        ..ConstraintSpec::default()
    };
    for c in f.clamp {
        let role = match c.role.as_str() {
            "P" => Role::Positive,
            "N" => Role::Negative,
            "I" => Role::Irrelevant,
            other => return Err(FormatError::Schema(format!("clamp role `{other}` is not P, N or I"))),
        };
        spec.clamps.push(RoleClamp {
            concept: c.concept,
            rule: c.rule,
            literal: c.literal,
            role,
        });
    }
    for r in f.inject_rules {
        spec.inject_rules.push(InjectedRule {
            concept: r.concept,
            body: parse_body(&r.body)?,
        });
    }
    for p in f.priorities {
        let value = match (p.value, p.reference, p.offset) {
            (Some(v), None, None) => PriorityValue::Absolute(v),
            (None, Some(reference), offset) => PriorityValue::Relative {
                reference,
                offset: offset.unwrap_or(0.0),
            },
            _ => {
                return Err(FormatError::Schema(format!(
                    "priority of concept {} needs either `value` or `reference` (with optional `offset`)",
                    p.concept
                )))
            }
        };
        spec.priorities.push(PriorityAssignment {
            concept: p.concept,
            value,
        });
    }
    Ok(spec)
}

pub fn load_constraints(path: &Path) -> Result<ConstraintSpec> {
    parse_constraints(&error::read_to_string(path)?)
}

/// Hex SHA-256 of the canonical JSON form of `spec`.
pub fn constraint_digest(spec: &ConstraintSpec) -> String {
    let json = serde_json::to_vec(spec).expect("constraint specs always serialise");
    hex::encode(Sha256::digest(&json))
}

fn parse_body(s: &str) -> Result<Vec<Literal>> {
    let s = s.trim();
    if s == "." || s.is_empty() {
        return Ok(Vec::new());
    }
    s.split('&')
        .map(|lit| {
            let lit = lit.trim();
            let (positive, name) = match lit.strip_prefix('!') {
                Some(rest) => (false, rest.trim()),
                None => (true, lit),
            };
            name.strip_prefix('C')
                .and_then(|d| d.parse().ok())
                .map(|concept| Literal { concept, positive })
                .ok_or_else(|| FormatError::Schema(format!("bad literal `{lit}` in injected rule")))
        })
        .collect()
}
