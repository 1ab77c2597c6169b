//! Training-time model interventions.
//!
//! A [`ConstraintSet`] edits the allow-matrix (which concepts may be parents
//! of which), assigns node priorities, clamps individual role slots and
//! injects whole rules. Construction checks everything that can be checked
//! without knowing the learned priorities and rejects any combination that
//! could ever produce a cyclic concept graph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{HcmrError, Result};
use crate::rule_memory::Role;

/// A literal of an injected rule body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Literal {
    pub concept: usize,
    pub positive: bool,
}

/// A fully specified rule for `concept`. Injected rules fill the concept's
/// rule slots in the order they are listed.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InjectedRule {
    pub concept: usize,
    pub body: Vec<Literal>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PriorityValue {
    /// `O_i := value`.
    Absolute(f64),
    /// `O_i := O_reference + offset`.
    Relative { reference: usize, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PriorityAssignment {
    pub concept: usize,
    pub value: PriorityValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoleClamp {
    pub concept: usize,
    pub rule: usize,
    pub literal: usize,
    pub role: Role,
}

/// Plain description of a set of interventions; validated by [`ConstraintSet::new`].
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConstraintSpec {
    pub force_source: Vec<usize>,
    pub force_sink: Vec<usize>,
    /// `(child, parent)` pairs that may never form an edge.
    pub forbid_parent: Vec<(usize, usize)>,
    /// `(child, parent)` pairs allowed regardless of priorities.
    pub allow_parent: Vec<(usize, usize)>,
    pub clamps: Vec<RoleClamp>,
    pub inject_rules: Vec<InjectedRule>,
    pub priorities: Vec<PriorityAssignment>,
    /// Concepts whose every rule slot is injected use the first injected rule
    /// whose body holds instead of the neural selector.
    pub pin_injected_selection: bool,
}

impl ConstraintSpec {
    pub fn is_empty(&self) -> bool {
        *self == ConstraintSpec::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Anchor {
    Free(usize),
    Fixed(f64),
}

/// Validated, immutable set of interventions for a memory of fixed shape.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    n_concepts: usize,
    n_rules: usize,
    spec: ConstraintSpec,
    /// `(child, parent) -> allowed`.
    allow_overrides: BTreeMap<(usize, usize), bool>,
    clamps: BTreeMap<(usize, usize, usize), Role>,
    /// Number of injected rule slots per concept.
    injected: Vec<usize>,
    anchors: Vec<(Anchor, f64)>,
}

/// Boolean allow-matrix plus which entries follow the learned priorities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowMatrix {
    pub n_concepts: usize,
    /// `allowed[i * n + j]`: concept `j` may be a parent of concept `i`.
    pub allowed: Vec<bool>,
    learnable: Vec<bool>,
}

impl AllowMatrix {
    #[inline]
    pub fn allowed(&self, child: usize, parent: usize) -> bool {
        self.allowed[child * self.n_concepts + parent]
    }

    /// Whether the entry is derived from the priorities (and therefore passes a surrogate gradient).
    #[inline]
    pub fn learnable(&self, child: usize, parent: usize) -> bool {
        self.learnable[child * self.n_concepts + parent]
    }
}

fn invalid(msg: String) -> HcmrError {
    HcmrError::InconsistentConstraint(msg)
}

impl ConstraintSet {
    pub fn empty(n_concepts: usize, n_rules: usize) -> Self {
        ConstraintSet::new(n_concepts, n_rules, ConstraintSpec::default()).expect("empty constraints are consistent")
    }

    pub fn new(n_concepts: usize, n_rules: usize, spec: ConstraintSpec) -> Result<Self> {
        let n = n_concepts;
        let check = |c: usize, what: &str| -> Result<()> {
            if c >= n {
                Err(invalid(format!("{what} refers to concept {c}, but there are only {n}")))
            } else {
                Ok(())
            }
        };

        let mut allow_overrides = BTreeMap::new();
        let mut set_override = |child: usize, parent: usize, value: bool| -> Result<()> {
            if child == parent {
                if value {
                    return Err(invalid(format!("concept {child} cannot be its own parent")));
                }
                return Ok(());
            }
            match allow_overrides.insert((child, parent), value) {
                Some(prev) if prev != value => Err(invalid(format!(
                    "concept {parent} is both allowed and forbidden as a parent of {child}"
                ))),
                _ => Ok(()),
            }
        };
        for &k in &spec.force_source {
            check(k, "force_source")?;
            for j in 0..n {
                set_override(k, j, false)?;
            }
        }
        for &k in &spec.force_sink {
            check(k, "force_sink")?;
            for i in 0..n {
                set_override(i, k, false)?;
            }
        }
        for &(c, p) in &spec.forbid_parent {
            check(c, "forbid_parent")?;
            check(p, "forbid_parent")?;
            set_override(c, p, false)?;
        }
        for &(c, p) in &spec.allow_parent {
            check(c, "allow")?;
            check(p, "allow")?;
            set_override(c, p, true)?;
        }

        let anchors = resolve_anchors(n, &spec.priorities)?;

        let mut clamps = BTreeMap::new();
        let mut add_clamp = |i: usize, k: usize, j: usize, role: Role, what: &str| -> Result<()> {
            check(i, what)?;
            check(j, what)?;
            if k >= n_rules {
                return Err(invalid(format!("{what} uses rule slot {k} of concept {i}, but there are only {n_rules}")));
            }
            match clamps.insert((i, k, j), role) {
                Some(prev) if prev != role => {
                    Err(invalid(format!("slot ({i}, {k}, {j}) clamped to both {prev:?} and {role:?}")))
                }
                _ => Ok(()),
            }
        };
        for c in &spec.clamps {
            add_clamp(c.concept, c.rule, c.literal, c.role, "clamp")?;
        }
        let mut injected = vec![0usize; n];
        for rule in &spec.inject_rules {
            check(rule.concept, "inject_rules")?;
            let i = rule.concept;
            let k = injected[i];
            if k >= n_rules {
                return Err(invalid(format!("more than {n_rules} rules injected for concept {i}")));
            }
            injected[i] += 1;
            let mut roles = vec![Role::Irrelevant; n];
            for lit in &rule.body {
                check(lit.concept, "inject_rules")?;
                if lit.concept == i {
                    return Err(invalid(format!("injected rule for concept {i} mentions the concept itself")));
                }
                let role = if lit.positive { Role::Positive } else { Role::Negative };
                if roles[lit.concept] != Role::Irrelevant && roles[lit.concept] != role {
                    return Err(invalid(format!(
                        "injected rule for concept {i} uses concept {} both positively and negatively",
                        lit.concept
                    )));
                }
                roles[lit.concept] = role;
            }
            for (j, role) in roles.into_iter().enumerate() {
                add_clamp(i, k, j, role, "inject_rules")?;
            }
        }

        let cs = ConstraintSet {
            n_concepts,
            n_rules,
            spec,
            allow_overrides,
            clamps,
            injected,
            anchors,
        };
        cs.check_clamps_allowed()?;
        cs.check_overrides_acyclic()?;
        Ok(cs)
    }

    pub fn n_concepts(&self) -> usize {
        self.n_concepts
    }

    pub fn n_rules(&self) -> usize {
        self.n_rules
    }

    pub fn spec(&self) -> &ConstraintSpec {
        &self.spec
    }

    pub fn is_empty(&self) -> bool {
        self.spec.is_empty()
    }

    pub fn check_dimensions(&self, n_concepts: usize, n_rules: usize) -> Result<()> {
        if self.n_concepts != n_concepts || self.n_rules != n_rules {
            return Err(HcmrError::Shape(format!(
                "constraints were built for {} concepts x {} rules, model has {n_concepts} x {n_rules}",
                self.n_concepts, self.n_rules
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn clamp(&self, i: usize, k: usize, j: usize) -> Option<Role> {
        if self.clamps.is_empty() {
            return None;
        }
        self.clamps.get(&(i, k, j)).copied()
    }

    pub fn allow_override(&self, child: usize, parent: usize) -> Option<bool> {
        self.allow_overrides.get(&(child, parent)).copied()
    }

    /// Number of rule slots of `concept` filled by injected rules (slots `0..count`).
    pub fn injected_rules(&self, concept: usize) -> usize {
        self.injected[concept]
    }

    /// Concept whose every rule slot is injected and whose selection is pinned.
    pub fn selection_pinned(&self, concept: usize) -> bool {
        self.spec.pin_injected_selection && self.injected[concept] == self.n_rules
    }

    /// Whether any rule-selection is pinned.
    pub fn any_selection_pinned(&self) -> bool {
        (0..self.n_concepts).any(|i| self.selection_pinned(i))
    }

    /// Whether the raw priority of concept `i` is a free parameter.
    pub fn priority_is_free(&self, i: usize) -> bool {
        matches!(self.anchors[i], (Anchor::Free(a), _) if a == i)
    }

    /// Effective priorities after applying assignments to the raw parameter vector.
    pub fn resolve_priorities(&self, raw: &[f64]) -> Vec<f64> {
        self.anchors
            .iter()
            .map(|&(anchor, offset)| match anchor {
                Anchor::Free(a) => raw[a] + offset,
                Anchor::Fixed(v) => v + offset,
            })
            .collect()
    }

    /// Maps a gradient on the effective priorities back to the raw parameters.
    pub fn priorities_backward(&self, grad_resolved: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n_concepts];
        for (&(anchor, _), &gr) in self.anchors.iter().zip(grad_resolved) {
            if let Anchor::Free(a) = anchor {
                g[a] += gr;
            }
        }
        g
    }

    /// `Some(O_parent > O_child)` when the assignments decide the comparison for every raw value.
    fn decided_order(&self, child: usize, parent: usize) -> Option<bool> {
        let (ac, oc) = self.anchors[child];
        let (ap, op) = self.anchors[parent];
        match (ac, ap) {
            (Anchor::Fixed(vc), Anchor::Fixed(vp)) => Some(vp + op > vc + oc),
            (Anchor::Free(a), Anchor::Free(b)) if a == b => Some(op > oc),
            _ => None,
        }
    }

    /// `Some(A_ij)` when the value is known before training.
    fn decided_allow(&self, child: usize, parent: usize) -> Option<bool> {
        if child == parent {
            return Some(false);
        }
        self.allow_override(child, parent)
            .or_else(|| self.decided_order(child, parent))
    }

    fn check_clamps_allowed(&self) -> Result<()> {
        for (&(i, k, j), &role) in &self.clamps {
            if role != Role::Irrelevant && self.decided_allow(i, j) != Some(true) {
                return Err(invalid(format!(
                    "slot (concept {i}, rule {k}, literal {j}) is clamped to {role:?}, but concept {j} is not \
                     guaranteed to be an allowed parent of concept {i}; allow the edge or assign priorities"
                )));
            }
        }
        Ok(())
    }

    /// Could `parent -> child` ever be an edge of the concept graph?
    fn possible_edge(&self, child: usize, parent: usize) -> bool {
        if child == parent {
            return false;
        }
        let all_clamped = (0..self.n_rules).all(|k| self.clamp(child, k, parent).is_some());
        if all_clamped {
            return (0..self.n_rules).any(|k| self.clamp(child, k, parent) != Some(Role::Irrelevant))
                && self.decided_allow(child, parent) != Some(false);
        }
        self.decided_allow(child, parent) != Some(false)
    }

    /// Every cycle over allowed entries must use an edge allowed by override,
    /// since priority-derived entries follow a single order. Reject overrides
    /// that close any possible cycle.
    fn check_overrides_acyclic(&self) -> Result<()> {
        let n = self.n_concepts;
        for (&(child, parent), &value) in &self.allow_overrides {
            if !value || !self.possible_edge(child, parent) {
                continue;
            }
            // edge parent -> child; a path child ~> parent closes a cycle
            let mut seen = BTreeSet::new();
            let mut stack = vec![child];
            while let Some(u) = stack.pop() {
                if u == parent {
                    return Err(invalid(format!(
                        "allowing concept {parent} as a parent of {child} can create a cycle; \
                         forbid the reverse path or assign priorities"
                    )));
                }
                for v in 0..n {
                    if self.possible_edge(v, u) && seen.insert(v) {
                        stack.push(v);
                    }
                }
            }
        }
        Ok(())
    }

    /// Allow-matrix for the given effective priorities.
    pub fn allow_matrix(&self, priorities: &[f64]) -> AllowMatrix {
        let n = self.n_concepts;
        let mut allowed = vec![false; n * n];
        let mut learnable = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                match self.allow_override(i, j) {
                    Some(v) => allowed[i * n + j] = v,
                    None => {
                        allowed[i * n + j] = priorities[j] > priorities[i];
                        learnable[i * n + j] = true;
                    }
                }
            }
        }
        AllowMatrix {
            n_concepts: n,
            allowed,
            learnable,
        }
    }
}

fn resolve_anchors(n: usize, assignments: &[PriorityAssignment]) -> Result<Vec<(Anchor, f64)>> {
    let mut by_concept: BTreeMap<usize, PriorityValue> = BTreeMap::new();
    for a in assignments {
        if a.concept >= n {
            return Err(invalid(format!("priority assigned to unknown concept {}", a.concept)));
        }
        if let PriorityValue::Relative { reference, offset } = a.value {
            if reference >= n {
                return Err(invalid(format!("priority of concept {} refers to unknown concept {reference}", a.concept)));
            }
            if !offset.is_finite() {
                return Err(invalid(format!("priority offset of concept {} is not finite", a.concept)));
            }
        }
        if let PriorityValue::Absolute(v) = a.value {
            if !v.is_finite() {
                return Err(invalid(format!("priority of concept {} is not finite", a.concept)));
            }
        }
        if by_concept.insert(a.concept, a.value).is_some() {
            return Err(invalid(format!("priority of concept {} assigned twice", a.concept)));
        }
    }
    let mut anchors = Vec::with_capacity(n);
    for i in 0..n {
        let mut offset = 0.0;
        let mut cur = i;
        let mut steps = 0;
        let anchor = loop {
            match by_concept.get(&cur) {
                None => break Anchor::Free(cur),
                Some(PriorityValue::Absolute(v)) => break Anchor::Fixed(*v),
                Some(PriorityValue::Relative { reference, offset: o }) => {
                    offset += o;
                    cur = *reference;
                    steps += 1;
                    if steps > n {
                        return Err(invalid(format!("relational priority assignments of concept {i} form a cycle")));
                    }
                }
            }
        };
        anchors.push((anchor, offset));
    }
    Ok(anchors)
}
