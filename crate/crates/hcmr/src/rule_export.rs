//! Rule memory export: a line-oriented text form (`rules.txt`) and JSON.
//!
//! ```text
//! concepts 3
//! n_rules 2
//! priorities 2.5 1.25 -0.5
//! C0 <- .
//! C0 <- .
//! C1 <- C0
//! C1 <- .
//! C2 <- C0 & !C1
//! C2 <- !C0
//! parents
//! 0 0 0
//! 1 0 0
//! 1 1 0
//! ```
//!
//! Each concept lists exactly `n_rules` rules in slot order; `.` is the empty
//! body. Row `i` of the parent matrix marks the parents of concept `i`.
//! Lines starting with `#` are ignored.

use std::fmt::Write as _;
use std::path::Path;

use hcmr_core::{Role, SymbolicRuleSet};
use serde::{Deserialize, Serialize};

use crate::error::{self, FormatError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiteralEntry {
    pub concept_index: usize,
    pub sign: Sign,
}

/// Exported rule memory. `rules[i][k]` is the body of rule `k` of concept `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleExport {
    pub concepts: usize,
    pub n_rules: usize,
    pub priorities: Vec<f64>,
    pub rules: Vec<Vec<Vec<LiteralEntry>>>,
    pub parents: Vec<Vec<bool>>,
}

impl RuleExport {
    pub fn new(rules: &SymbolicRuleSet, priorities: &[f64]) -> Result<Self> {
        let n = rules.n_concepts;
        if priorities.len() != n {
            return Err(FormatError::Schema(format!("{} priorities for {n} concepts", priorities.len())));
        }
        let bodies = (0..n)
            .map(|i| {
                (0..rules.n_rules)
                    .map(|k| {
                        rules
                            .literals(i, k)
                            .into_iter()
                            .map(|(j, positive)| LiteralEntry {
                                concept_index: j,
                                sign: if positive { Sign::Positive } else { Sign::Negative },
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let parents = (0..n).map(|i| (0..n).map(|j| rules.is_parent(i, j)).collect()).collect();
        Ok(RuleExport {
            concepts: n,
            n_rules: rules.n_rules,
            priorities: priorities.to_vec(),
            rules: bodies,
            parents,
        })
    }

    /// Rebuilds the rule set, checking the parent matrix against the bodies.
    pub fn to_rules(&self) -> Result<SymbolicRuleSet> {
        let n = self.concepts;
        if self.priorities.len() != n || self.rules.len() != n || self.parents.len() != n {
            return Err(FormatError::Schema(format!("expected {n} priorities, rule lists and parent rows")));
        }
        if self.n_rules == 0 {
            return Err(FormatError::Schema("n_rules must be positive".into()));
        }
        let mut out = SymbolicRuleSet::empty(n, self.n_rules);
        for (i, per_concept) in self.rules.iter().enumerate() {
            if per_concept.len() != self.n_rules {
                return Err(FormatError::Schema(format!(
                    "concept {i} has {} rules, expected {}",
                    per_concept.len(),
                    self.n_rules
                )));
            }
            for (k, body) in per_concept.iter().enumerate() {
                for lit in body {
                    let j = lit.concept_index;
                    if j >= n || j == i {
                        return Err(FormatError::Schema(format!("rule {k} of concept {i} refers to concept {j}")));
                    }
                    if out.role(i, k, j) != Role::Irrelevant {
                        return Err(FormatError::Schema(format!("rule {k} of concept {i} repeats concept {j}")));
                    }
                    let role = match lit.sign {
                        Sign::Positive => Role::Positive,
                        Sign::Negative => Role::Negative,
                    };
                    out.set_role(i, k, j, role);
                }
            }
        }
        for (i, row) in self.parents.iter().enumerate() {
            if row.len() != n {
                return Err(FormatError::Schema(format!("parent row {i} has {} entries", row.len())));
            }
            for (j, &p) in row.iter().enumerate() {
                if p != out.is_parent(i, j) {
                    return Err(FormatError::Schema(format!(
                        "parent matrix entry ({i}, {j}) disagrees with the rules"
                    )));
                }
            }
        }
        Ok(out)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "concepts {}", self.concepts).unwrap();
        writeln!(s, "n_rules {}", self.n_rules).unwrap();
        s.push_str("priorities");
        for o in &self.priorities {
            // Debug formatting of f64 is the shortest string that parses back exactly
            write!(s, " {o:?}").unwrap();
        }
        s.push('\n');
        for (i, per_concept) in self.rules.iter().enumerate() {
            for body in per_concept {
                writeln!(s, "C{i} <- {}", body_text(body)).unwrap();
            }
        }
        s.push_str("parents\n");
        for row in &self.parents {
            let cells: Vec<&str> = row.iter().map(|&p| if p { "1" } else { "0" }).collect();
            writeln!(s, "{}", cells.join(" ")).unwrap();
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(t, l)| (t + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| lines.next().ok_or_else(|| FormatError::syntax(0, format!("missing {what}")));

        let (ln, l) = next("concepts line")?;
        let concepts = header_value(ln, l, "concepts")?;
        let (ln, l) = next("n_rules line")?;
        let n_rules = header_value(ln, l, "n_rules")?;

        let (ln, l) = next("priorities line")?;
        let rest = l
            .strip_prefix("priorities")
            .ok_or_else(|| FormatError::syntax(ln, "expected `priorities`"))?;
        let priorities = rest
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| FormatError::syntax(ln, format!("priority `{v}`: {e}"))))
            .collect::<Result<Vec<f64>>>()?;

        let mut rules = vec![Vec::new(); concepts];
        for i in 0..concepts {
            for _ in 0..n_rules {
                let (ln, l) = next("rule line")?;
                let (head, body) = l
                    .split_once("<-")
                    .ok_or_else(|| FormatError::syntax(ln, "expected `C<i> <- body`"))?;
                let head = parse_concept(head.trim()).ok_or_else(|| FormatError::syntax(ln, "bad rule head"))?;
                if head != i {
                    return Err(FormatError::syntax(ln, format!("expected a rule for C{i}, found C{head}")));
                }
                rules[i].push(parse_body(body.trim()).map_err(|m| FormatError::syntax(ln, m))?);
            }
        }

        let (ln, l) = next("parents line")?;
        if l != "parents" {
            return Err(FormatError::syntax(ln, "expected `parents`"));
        }
        let mut parents = Vec::with_capacity(concepts);
        for _ in 0..concepts {
            let (ln, l) = next("parent row")?;
            let row = l
                .split_whitespace()
                .map(|c| match c {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(FormatError::syntax(ln, format!("parent cell `{c}` is not 0 or 1"))),
                })
                .collect::<Result<Vec<bool>>>()?;
            parents.push(row);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(FormatError::syntax(ln, "trailing content"));
        }
        let export = RuleExport {
            concepts,
            n_rules,
            priorities,
            rules,
            parents,
        };
        export.to_rules()?;
        Ok(export)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let export: RuleExport = serde_json::from_str(text)?;
        export.to_rules()?;
        Ok(export)
    }

    /// Reads either format; files ending in `.json` are parsed as JSON.
    pub fn load(path: &Path) -> Result<Self> {
        let text = error::read_to_string(path)?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_text(&text)
        }
    }
}

fn body_text(body: &[LiteralEntry]) -> String {
    if body.is_empty() {
        return ".".into();
    }
    let parts: Vec<String> = body
        .iter()
        .map(|l| match l.sign {
            Sign::Positive => format!("C{}", l.concept_index),
            Sign::Negative => format!("!C{}", l.concept_index),
        })
        .collect();
    parts.join(" & ")
}

fn header_value(line: usize, l: &str, key: &str) -> Result<usize> {
    let rest = l
        .strip_prefix(key)
        .ok_or_else(|| FormatError::syntax(line, format!("expected `{key}`")))?;
    rest.trim()
        .parse()
        .map_err(|e| FormatError::syntax(line, format!("{key}: {e}")))
}

fn parse_concept(s: &str) -> Option<usize> {
    s.strip_prefix('C')?.parse().ok()
}

fn parse_body(s: &str) -> std::result::Result<Vec<LiteralEntry>, String> {
    if s == "." {
        return Ok(Vec::new());
    }
    s.split('&')
        .map(|lit| {
            let lit = lit.trim();
            let (sign, name) = match lit.strip_prefix('!') {
                Some(rest) => (Sign::Negative, rest.trim()),
                None => (Sign::Positive, lit),
            };
            parse_concept(name)
                .map(|concept_index| LiteralEntry { concept_index, sign })
                .ok_or_else(|| format!("bad literal `{lit}`"))
        })
        .collect()
}
