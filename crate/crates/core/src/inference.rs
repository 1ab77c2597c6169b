//! Hierarchical MAP inference, exact marginals and local explanations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::decoder;
use crate::encoder::{self, EncoderOutput};
use crate::error::{HcmrError, Result};
use crate::model::FrozenModel;
use crate::rule_memory::SymbolicRuleSet;

/// Ground-truth values substituted for predicted concepts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterventionAssignment {
    pub values: BTreeMap<usize, bool>,
}

impl InterventionAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, concept: usize, value: bool) -> Self {
        self.values.insert(concept, value);
        self
    }

    pub fn insert(&mut self, concept: usize, value: bool) {
        self.values.insert(concept, value);
    }

    pub fn get(&self, concept: usize) -> Option<bool> {
        self.values.get(&concept).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn validate(&self, n_concepts: usize) -> Result<()> {
        match self.values.keys().find(|&&c| c >= n_concepts) {
            Some(c) => Err(HcmrError::InvalidArgument(format!(
                "intervention on concept {c}, but the model has {n_concepts} concepts"
            ))),
            None => Ok(()),
        }
    }
}

/// How one concept was predicted.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConceptTrace {
    pub concept: usize,
    pub is_source: bool,
    pub probability: f64,
    pub value: bool,
    pub intervened: bool,
    /// Most likely rule whose body agrees with the predicted value (non-sources only).
    pub selected_rule: Option<usize>,
    pub rule_text: Option<String>,
    pub selection: Vec<f64>,
    /// Body of the selected rule as `(concept, positive)` literals.
    pub rule_literals: Vec<(usize, bool)>,
    /// Values of the concepts used by the selected rule.
    pub parent_values: Vec<(usize, bool)>,
}

/// Per-concept record of a MAP prediction, in the order concepts were computed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionTrace {
    pub concepts: Vec<ConceptTrace>,
}

impl PredictionTrace {
    fn by_index<T>(&self, f: impl Fn(&ConceptTrace) -> T) -> Vec<T>
    where
        T: Default + Clone,
    {
        let mut v = vec![T::default(); self.concepts.len()];
        for c in &self.concepts {
            v[c.concept] = f(c);
        }
        v
    }

    /// Probabilities indexed by concept.
    pub fn probabilities(&self) -> Vec<f64> {
        self.by_index(|c| c.probability)
    }

    /// Hard values indexed by concept.
    pub fn values(&self) -> Vec<bool> {
        self.by_index(|c| c.value)
    }

    pub fn concept(&self, i: usize) -> Option<&ConceptTrace> {
        self.concepts.iter().find(|c| c.concept == i)
    }
}

fn default_name(i: usize) -> String {
    format!("C{i}")
}

fn name_of(names: Option<&[String]>, i: usize) -> String {
    names.and_then(|n| n.get(i).cloned()).unwrap_or_else(|| default_name(i))
}

/// Rule `k` of concept `i` as text, e.g. `C2 <- C0 & !C1`; an empty body is `C2 <- .`.
pub fn rule_text(rules: &SymbolicRuleSet, i: usize, k: usize, names: Option<&[String]>) -> String {
    literal_text(&name_of(names, i), &rules.literals(i, k), names)
}

fn literal_text(head: &str, lits: &[(usize, bool)], names: Option<&[String]>) -> String {
    let mut s = format!("{head} <- ");
    if lits.is_empty() {
        s.push('.');
    }
    for (t, (j, pos)) in lits.iter().enumerate() {
        if t > 0 {
            s.push_str(" & ");
        }
        if !pos {
            s.push('!');
        }
        s.push_str(&name_of(names, *j));
    }
    s
}

/// MAP inference following the model's topological order.
pub fn infer_map(x: &[f64], model: &FrozenModel, interventions: &InterventionAssignment) -> Result<PredictionTrace> {
    infer_map_in_order(x, model, interventions, &model.graph.topo_order)
}

/// MAP inference with an explicit order, which must be topological for the model's graph.
pub fn infer_map_in_order(
    x: &[f64],
    model: &FrozenModel,
    interventions: &InterventionAssignment,
    order: &[usize],
) -> Result<PredictionTrace> {
    let out = encoder::encode(x, &model.encoder)?;
    infer_from_encoding(&out, model, interventions, order)
}

/// MAP inference given a precomputed encoder output.
pub fn infer_from_encoding(
    out: &EncoderOutput,
    model: &FrozenModel,
    interventions: &InterventionAssignment,
    order: &[usize],
) -> Result<PredictionTrace> {
    let n = model.rules.n_concepts;
    interventions.validate(n)?;
    check_order(model, order)?;
    let mut c_hat = vec![false; n];
    let mut concepts = Vec::with_capacity(n);
    for &i in order {
        let is_source = model.rules.is_source(i);
        let mut trace = ConceptTrace {
            concept: i,
            is_source,
            probability: 0.0,
            value: false,
            intervened: false,
            selected_rule: None,
            rule_text: None,
            selection: Vec::new(),
            rule_literals: Vec::new(),
            parent_values: Vec::new(),
        };
        if let Some(v) = interventions.get(i) {
            trace.intervened = true;
            trace.value = v;
            trace.probability = if v { 1.0 } else { 0.0 };
        } else if is_source {
            trace.probability = out.source_probs[i];
        } else {
            let selection = model.selection(i, out, &c_hat)?;
            trace.probability = decoder::rule_mixture(&selection, i, &c_hat, &model.rules);
            let value = trace.probability > 0.5;
            // a value above 1/2 needs a satisfied rule with positive weight, and vice versa
            let k = (0..selection.len())
                .filter(|&k| decoder::evaluate_rule(model.rules.rule(i, k), &c_hat) == value)
                .fold(None, |best: Option<usize>, k| match best {
                    Some(b) if selection[b] >= selection[k] => Some(b),
                    _ => Some(k),
                })
                .unwrap_or_else(|| crate::math::argmax(&selection));
            trace.selected_rule = Some(k);
            trace.rule_text = Some(rule_text(&model.rules, i, k, None));
            trace.rule_literals = model.rules.literals(i, k);
            trace.parent_values = trace.rule_literals.iter().map(|&(j, _)| (j, c_hat[j])).collect();
            trace.selection = selection;
        }
        if !trace.intervened {
            trace.value = trace.probability > 0.5;
        }
        c_hat[i] = trace.value;
        concepts.push(trace);
    }
    Ok(PredictionTrace { concepts })
}

fn check_order(model: &FrozenModel, order: &[usize]) -> Result<()> {
    let n = model.rules.n_concepts;
    let mut pos = vec![usize::MAX; n];
    for (t, &i) in order.iter().enumerate() {
        if i >= n || pos[i] != usize::MAX {
            return Err(HcmrError::InvalidArgument("order is not a permutation of the concepts".into()));
        }
        pos[i] = t;
    }
    if order.len() != n {
        return Err(HcmrError::InvalidArgument("order is not a permutation of the concepts".into()));
    }
    for &(p, c) in &model.graph.edges {
        if pos[p] > pos[c] {
            return Err(HcmrError::InvalidArgument(format!(
                "order places concept {c} before its parent {p}"
            )));
        }
    }
    Ok(())
}

/// Exact `p(C_i = 1 | x)` for every concept by enumerating assignments to its ancestors.
pub fn infer_exact(x: &[f64], model: &FrozenModel, max_width: usize) -> Result<Vec<f64>> {
    let out = encoder::encode(x, &model.encoder)?;
    let n = model.rules.n_concepts;
    let mut result = vec![0.0; n];
    for i in 0..n {
        let ancestors: Vec<usize> = model.graph.ancestors(i).into_iter().collect();
        if ancestors.len() > max_width {
            return Err(HcmrError::Tractability(format!(
                "concept {i} has {} ancestors, more than the limit of {max_width}",
                ancestors.len()
            )));
        }
        // ancestors in topological order
        let order: Vec<usize> = model
            .graph
            .topo_order
            .iter()
            .copied()
            .filter(|a| ancestors.contains(a))
            .collect();
        let mut total = 0.0;
        let mut c_hat = vec![false; n];
        for mask in 0u64..(1u64 << order.len()) {
            let mut weight = 1.0;
            for (b, &a) in order.iter().enumerate() {
                c_hat[a] = mask >> b & 1 == 1;
            }
            for &a in &order {
                let p = conditional(model, &out, a, &c_hat)?;
                weight *= if c_hat[a] { p } else { 1.0 - p };
                if weight == 0.0 {
                    break;
                }
            }
            if weight > 0.0 {
                total += weight * conditional(model, &out, i, &c_hat)?;
            }
        }
        result[i] = total;
    }
    Ok(result)
}

/// `p(C_i = 1 | parents)` under the frozen rules.
fn conditional(model: &FrozenModel, out: &EncoderOutput, i: usize, c_hat: &[bool]) -> Result<f64> {
    if model.rules.is_source(i) {
        Ok(out.source_probs[i])
    } else {
        let s = model.selection(i, out, c_hat)?;
        Ok(decoder::rule_mixture(&s, i, c_hat, &model.rules))
    }
}

fn bool_text(b: bool) -> &'static str {
    if b {
        "True"
    } else {
        "False"
    }
}

/// One line per concept, in trace order.
pub fn explain(trace: &PredictionTrace) -> String {
    explain_with_names(trace, None)
}

pub fn explain_with_names(trace: &PredictionTrace, names: Option<&[String]>) -> String {
    let mut s = String::new();
    for c in &trace.concepts {
        let name = name_of(names, c.concept);
        let _ = write!(s, "{name} := {}", bool_text(c.value));
        if c.intervened {
            s.push_str(" (intervened)");
        } else if c.is_source {
            let _ = write!(s, " via encoder (p={:.2})", c.probability);
        } else if c.selected_rule.is_some() {
            let _ = write!(s, " via rule {}", literal_text(&name, &c.rule_literals, names));
            if !c.parent_values.is_empty() {
                let vals: Vec<String> = c
                    .parent_values
                    .iter()
                    .map(|&(j, v)| format!("{}={}", name_of(names, j), bool_text(v)))
                    .collect();
                let _ = write!(s, " ({})", vals.join(", "));
            }
        }
        s.push('\n');
    }
    s
}
