//! The learnable rule memory.
//!
//! Each concept owns `n_R` rule embeddings. A small network decodes every
//! embedding into one categorical distribution over roles per concept
//! (positive literal, negative literal, irrelevant). The node priorities then
//! zero out every role that would let a concept depend on a concept of equal
//! or lower priority, which makes the implied graph acyclic for any
//! parameter value.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::ModelConfig;
use crate::constraints::{AllowMatrix, ConstraintSet};
use crate::error::{HcmrError, Result};
use crate::math;
use crate::nn::{Activation, Dense, Mlp, MlpCache, ParamTensors};

/// Role of a concept inside a rule body.
///
/// The discriminant order doubles as the argmax tie-break order (P > N > I).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Role {
    Positive = 0,
    Negative = 1,
    Irrelevant = 2,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Positive, Role::Negative, Role::Irrelevant];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Role {
        Role::ALL[i]
    }

    pub fn symbol(self) -> char {
        match self {
            Role::Positive => 'P',
            Role::Negative => 'N',
            Role::Irrelevant => 'I',
        }
    }

    pub fn from_symbol(c: char) -> Option<Role> {
        match c {
            'P' | 'p' => Some(Role::Positive),
            'N' | 'n' => Some(Role::Negative),
            'I' | 'i' => Some(Role::Irrelevant),
            _ => None,
        }
    }
}

/// Categorical role probabilities indexed `(child i, rule k, concept j, role)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoleTensor {
    pub n_concepts: usize,
    pub n_rules: usize,
    pub probs: Vec<f64>,
}

impl RoleTensor {
    pub fn new(n_concepts: usize, n_rules: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_concepts * n_rules * n_concepts * 3 {
            return Err(HcmrError::Shape(format!(
                "role tensor needs {} entries, got {}",
                n_concepts * n_rules * n_concepts * 3,
                probs.len()
            )));
        }
        Ok(RoleTensor {
            n_concepts,
            n_rules,
            probs,
        })
    }

    /// Every slot concentrated on one role.
    pub fn from_roles(rules: &SymbolicRuleSet) -> Self {
        RoleTensor {
            n_concepts: rules.n_concepts,
            n_rules: rules.n_rules,
            probs: rules.one_hot(),
        }
    }

    #[inline]
    pub fn offset(&self, i: usize, k: usize, j: usize) -> usize {
        ((i * self.n_rules + k) * self.n_concepts + j) * 3
    }

    #[inline]
    pub fn slot(&self, i: usize, k: usize, j: usize) -> &[f64] {
        let o = self.offset(i, k, j);
        &self.probs[o..o + 3]
    }

    #[inline]
    pub fn slot_mut(&mut self, i: usize, k: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, k, j);
        &mut self.probs[o..o + 3]
    }

    /// Largest deviation of any slot's total from 1.
    pub fn max_normalization_error(&self) -> f64 {
        self.probs
            .chunks(3)
            .map(|s| (s.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Learnable parameters of the memory: rule embeddings, the role decoder and the node priorities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RuleMemoryParams {
    pub n_concepts: usize,
    pub n_rules: usize,
    pub size_rule_emb: usize,
    /// Shape `(n_C, n_R, size_rule_emb)`.
    pub rule_embeddings: Vec<f64>,
    /// `size_rule_emb -> size_rule_emb` (leaky rectifier) `-> 3 n_C` logits.
    pub role_decoder: Mlp,
    /// Node priorities `O`; concept `j` may appear in rules of `i` only when `O_j > O_i`.
    pub priorities: Vec<f64>,
}

impl RuleMemoryParams {
    pub fn new<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Self {
        let n = config.n_concepts;
        let d = config.size_rule_emb;
        let rule_embeddings = (0..n * config.n_rules * d)
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let role_decoder = Mlp::new(&[d, d, 3 * n], Activation::LeakyRelu, Activation::Identity, rng);
        let priorities = (0..n)
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                z + i as f64 * 1e-6
            })
            .collect();
        RuleMemoryParams {
            n_concepts: n,
            n_rules: config.n_rules,
            size_rule_emb: d,
            rule_embeddings,
            role_decoder,
            priorities,
        }
    }

    /// Parameters whose decoder emits exactly `logits` (shape `(n_C, n_R, n_C, 3)`)
    /// for each rule slot. Uses one-hot rule embeddings, so `size_rule_emb = n_C * n_R`.
    pub fn from_role_logits(n_concepts: usize, n_rules: usize, logits: &[f64], priorities: Vec<f64>) -> Result<Self> {
        let slots = n_concepts * n_rules;
        if logits.len() != slots * n_concepts * 3 || priorities.len() != n_concepts {
            return Err(HcmrError::Shape("role logits or priorities have the wrong length".into()));
        }
        let mut rule_embeddings = vec![0.0; slots * slots];
        for s in 0..slots {
            rule_embeddings[s * slots + s] = 1.0;
        }
        let mut first = Dense::zeros(slots, slots);
        for s in 0..slots {
            first.weight[s * slots + s] = 1.0;
        }
        let mut second = Dense::zeros(slots, 3 * n_concepts);
        for s in 0..slots {
            for o in 0..3 * n_concepts {
                second.weight[o * slots + s] = logits[s * 3 * n_concepts + o];
            }
        }
        Ok(RuleMemoryParams {
            n_concepts,
            n_rules,
            size_rule_emb: slots,
            rule_embeddings,
            role_decoder: Mlp {
                layers: vec![first, second],
                hidden: Activation::LeakyRelu,
                output: Activation::Identity,
            },
            priorities,
        })
    }

    /// Parameters whose hard rules induce exactly the DAG `edges` (`(parent, child)` pairs).
    /// Priorities fall along a topological order so every parent outranks its children;
    /// rule 0 of each child lists all its parents as positive literals, every other slot is
    /// irrelevant.
    pub fn for_graph(n_concepts: usize, n_rules: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let n = n_concepts;
        let mut parent = vec![false; n * n];
        for &(p, c) in edges {
            if p >= n || c >= n || p == c {
                return Err(HcmrError::InvalidArgument(format!("edge ({p}, {c}) is not valid for {n} concepts")));
            }
            parent[c * n + p] = true;
        }
        let order = topological_order(n, &parent)
            .ok_or_else(|| HcmrError::InvalidArgument("edges contain a cycle".into()))?;
        let mut priorities = vec![0.0; n];
        for (t, &i) in order.iter().enumerate() {
            priorities[i] = (n - t) as f64;
        }
        let mut logits = vec![0.0; n * n_rules * n * 3];
        for i in 0..n {
            for k in 0..n_rules {
                for j in 0..n {
                    let o = ((i * n_rules + k) * n + j) * 3;
                    let role = if k == 0 && parent[i * n + j] { 0 } else { 2 };
                    for r in 0..3 {
                        logits[o + r] = if r == role { 10.0 } else { -10.0 };
                    }
                }
            }
        }
        Self::from_role_logits(n, n_rules, &logits, priorities)
    }

    pub fn zeros_like(&self) -> Self {
        RuleMemoryParams {
            n_concepts: self.n_concepts,
            n_rules: self.n_rules,
            size_rule_emb: self.size_rule_emb,
            rule_embeddings: vec![0.0; self.rule_embeddings.len()],
            role_decoder: self.role_decoder.zeros_like(),
            priorities: vec![0.0; self.priorities.len()],
        }
    }

    pub fn embedding(&self, i: usize, k: usize) -> &[f64] {
        let d = self.size_rule_emb;
        let s = i * self.n_rules + k;
        &self.rule_embeddings[s * d..(s + 1) * d]
    }
}

impl ParamTensors for RuleMemoryParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.rule_embeddings];
        v.extend(self.role_decoder.tensors());
        v.push(&self.priorities);
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = vec![&mut self.rule_embeddings];
        v.extend(self.role_decoder.tensors_mut());
        v.push(&mut self.priorities);
        v
    }
}

/// Per-slot decoder activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct DecodeCache {
    caches: Vec<MlpCache>,
}

/// Softmax-normalised unadjusted role distributions `R'`.
pub fn decode_unadjusted_roles(params: &RuleMemoryParams) -> Result<RoleTensor> {
    decode_with_cache(params).map(|(r, _)| r)
}

pub fn decode_with_cache(params: &RuleMemoryParams) -> Result<(RoleTensor, DecodeCache)> {
    let n = params.n_concepts;
    let mut probs = Vec::with_capacity(n * params.n_rules * n * 3);
    let mut caches = Vec::with_capacity(n * params.n_rules);
    for i in 0..n {
        for k in 0..params.n_rules {
            let cache = params.role_decoder.forward_cached(params.embedding(i, k));
            let logits = cache.output();
            if logits.len() != 3 * n {
                return Err(HcmrError::Shape(format!(
                    "role decoder emits {} logits, expected {}",
                    logits.len(),
                    3 * n
                )));
            }
            if logits.iter().any(|x| !x.is_finite()) {
                return Err(HcmrError::NumericFailure { concept: i, rule: k });
            }
            for j in 0..n {
                let mut s = [logits[3 * j], logits[3 * j + 1], logits[3 * j + 2]];
                math::softmax_in_place(&mut s);
                probs.extend_from_slice(&s);
            }
            caches.push(cache);
        }
    }
    Ok((
        RoleTensor {
            n_concepts: n,
            n_rules: params.n_rules,
            probs,
        },
        DecodeCache { caches },
    ))
}

/// Backpropagates a gradient on `R'` into the rule embeddings and the role decoder.
pub fn decode_backward(
    params: &RuleMemoryParams,
    r_prime: &RoleTensor,
    cache: &DecodeCache,
    grad_r_prime: &[f64],
    grads: &mut RuleMemoryParams,
) {
    let n = params.n_concepts;
    let d = params.size_rule_emb;
    let mut g_logits = vec![0.0; 3 * n];
    let mut g_emb = vec![0.0; d];
    for i in 0..n {
        for k in 0..params.n_rules {
            let slot = i * params.n_rules + k;
            let base = r_prime.offset(i, k, 0);
            let gp = &grad_r_prime[base..base + 3 * n];
            if gp.iter().all(|&g| g == 0.0) {
                continue;
            }
            let p = &r_prime.probs[base..base + 3 * n];
            for j in 0..n {
                math::softmax_backward(
                    &p[3 * j..3 * j + 3],
                    &gp[3 * j..3 * j + 3],
                    &mut g_logits[3 * j..3 * j + 3],
                );
            }
            g_emb.fill(0.0);
            params
                .role_decoder
                .backward(&cache.caches[slot], &g_logits, &mut grads.role_decoder, Some(&mut g_emb));
            for (a, b) in grads.rule_embeddings[slot * d..(slot + 1) * d].iter_mut().zip(&g_emb) {
                *a += b;
            }
        }
    }
}

/// Result of [`adjust_roles_detailed`]: the adjusted tensor plus what its backward pass needs.
#[derive(Debug, Clone)]
pub struct AdjustedRoles {
    pub roles: RoleTensor,
    pub allow: AllowMatrix,
    /// Slots whose distribution was clamped (no gradient flows through them).
    pub clamped: Vec<bool>,
    /// Effective priorities after constraint assignments.
    pub priorities: Vec<f64>,
}

/// Applies the priority indicator (or the constraint allow-matrix) and role clamps.
pub fn adjust_roles(r_prime: &RoleTensor, priorities: &[f64], constraints: Option<&ConstraintSet>) -> Result<RoleTensor> {
    adjust_roles_detailed(r_prime, priorities, constraints).map(|a| a.roles)
}

pub fn adjust_roles_detailed(
    r_prime: &RoleTensor,
    priorities: &[f64],
    constraints: Option<&ConstraintSet>,
) -> Result<AdjustedRoles> {
    let n = r_prime.n_concepts;
    if priorities.len() != n {
        return Err(HcmrError::Shape(format!("expected {n} priorities, got {}", priorities.len())));
    }
    let empty;
    let cs = match constraints {
        Some(c) => {
            c.check_dimensions(n, r_prime.n_rules)?;
            c
        }
        None => {
            empty = ConstraintSet::empty(n, r_prime.n_rules);
            &empty
        }
    };
    let resolved = cs.resolve_priorities(priorities);
    let allow = cs.allow_matrix(&resolved);
    let mut roles = r_prime.clone();
    let mut clamped = vec![false; n * r_prime.n_rules * n];
    for i in 0..n {
        for k in 0..r_prime.n_rules {
            for j in 0..n {
                let allowed = allow.allowed(i, j);
                let clamp = cs.clamp(i, k, j);
                if let Some(role) = clamp {
                    if role != Role::Irrelevant && !allowed {
                        return Err(HcmrError::InconsistentConstraint(format!(
                            "clamp ({i}, {k}, {j}) to {role:?} but concept {j} is not allowed as a parent of {i}"
                        )));
                    }
                }
                let slot = roles.slot_mut(i, k, j);
                match clamp {
                    Some(role) => {
                        slot.fill(0.0);
                        slot[role.index()] = 1.0;
                        clamped[(i * r_prime.n_rules + k) * n + j] = true;
                    }
                    None if !allowed => {
                        slot[0] = 0.0;
                        slot[1] = 0.0;
                        slot[2] = 1.0;
                    }
                    None => {}
                }
            }
        }
    }
    Ok(AdjustedRoles {
        roles,
        allow,
        clamped,
        priorities: resolved,
    })
}

/// Straight-through backward of [`adjust_roles_detailed`].
///
/// Forward uses the hard indicator `1[O_j > O_i]`; backward differentiates
/// `sigmoid((O_j - O_i) / temperature)` instead. Returns the gradients on
/// `R'` and on the effective priorities.
pub fn adjust_backward(
    r_prime: &RoleTensor,
    adjusted: &AdjustedRoles,
    grad_adjusted: &[f64],
    temperature: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = r_prime.n_concepts;
    let nr = r_prime.n_rules;
    let mut g_prime = vec![0.0; r_prime.probs.len()];
    let mut g_allow = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..nr {
            for j in 0..n {
                if adjusted.clamped[(i * nr + k) * n + j] {
                    continue;
                }
                let o = r_prime.offset(i, k, j);
                let g = &grad_adjusted[o..o + 3];
                let p = &r_prime.probs[o..o + 3];
                let a = if adjusted.allow.allowed(i, j) { 1.0 } else { 0.0 };
                for r in 0..3 {
                    g_prime[o + r] = a * g[r];
                }
                // d/dA of A p' + (1 - A) e_I
                g_allow[i * n + j] += g[0] * p[0] + g[1] * p[1] + g[2] * (p[2] - 1.0);
            }
        }
    }
    let mut g_priorities = vec![0.0; n];
    let pr = &adjusted.priorities;
    for i in 0..n {
        for j in 0..n {
            if i == j || !adjusted.allow.learnable(i, j) {
                continue;
            }
            let ga = g_allow[i * n + j];
            if ga == 0.0 {
                continue;
            }
            let s = math::sigmoid((pr[j] - pr[i]) / temperature);
            let ds = s * (1.0 - s) / temperature;
            g_priorities[j] += ga * ds;
            g_priorities[i] -= ga * ds;
        }
    }
    (g_prime, g_priorities)
}

/// Hard symbolic rules `r̂`, with derived parent matrix and source mask.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SymbolicRuleSet {
    pub n_concepts: usize,
    pub n_rules: usize,
    /// Shape `(n_C, n_R, n_C)`.
    pub roles: Vec<Role>,
    /// `parent[i * n_C + j]`: concept `j` appears in some rule of concept `i`.
    pub parent: Vec<bool>,
    pub source: Vec<bool>,
}

impl SymbolicRuleSet {
    pub fn from_roles(n_concepts: usize, n_rules: usize, roles: Vec<Role>) -> Result<Self> {
        let n = n_concepts;
        if roles.len() != n * n_rules * n {
            return Err(HcmrError::Shape(format!(
                "role assignment needs {} entries, got {}",
                n * n_rules * n,
                roles.len()
            )));
        }
        let mut parent = vec![false; n * n];
        for i in 0..n {
            for k in 0..n_rules {
                for j in 0..n {
                    if roles[(i * n_rules + k) * n + j] != Role::Irrelevant {
                        parent[i * n + j] = true;
                    }
                }
            }
        }
        let source = (0..n).map(|i| !(0..n).any(|j| parent[i * n + j])).collect();
        Ok(SymbolicRuleSet {
            n_concepts,
            n_rules,
            roles,
            parent,
            source,
        })
    }

    /// Memory where every rule is empty.
    pub fn empty(n_concepts: usize, n_rules: usize) -> Self {
        Self::from_roles(n_concepts, n_rules, vec![Role::Irrelevant; n_concepts * n_rules * n_concepts])
            .expect("shape is consistent by construction")
    }

    #[inline]
    pub fn role(&self, i: usize, k: usize, j: usize) -> Role {
        self.roles[(i * self.n_rules + k) * self.n_concepts + j]
    }

    pub fn set_role(&mut self, i: usize, k: usize, j: usize, role: Role) {
        let n = self.n_concepts;
        self.roles[(i * self.n_rules + k) * n + j] = role;
        *self = Self::from_roles(n, self.n_rules, core::mem::take(&mut self.roles)).expect("same shape");
    }

    /// Role vector of rule `k` of concept `i`.
    pub fn rule(&self, i: usize, k: usize) -> &[Role] {
        let n = self.n_concepts;
        let s = (i * self.n_rules + k) * n;
        &self.roles[s..s + n]
    }

    /// Literals `(concept, positive)` of rule `k` of concept `i`, in concept order.
    pub fn literals(&self, i: usize, k: usize) -> Vec<(usize, bool)> {
        self.rule(i, k)
            .iter()
            .enumerate()
            .filter_map(|(j, r)| match r {
                Role::Positive => Some((j, true)),
                Role::Negative => Some((j, false)),
                Role::Irrelevant => None,
            })
            .collect()
    }

    #[inline]
    pub fn is_parent(&self, child: usize, parent: usize) -> bool {
        self.parent[child * self.n_concepts + parent]
    }

    pub fn parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_concepts).filter(move |&j| self.is_parent(i, j))
    }

    #[inline]
    pub fn is_source(&self, i: usize) -> bool {
        self.source[i]
    }

    /// One-hot encoding with the layout of [`RoleTensor::probs`].
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.roles.len() * 3];
        for (s, r) in self.roles.iter().enumerate() {
            v[3 * s + r.index()] = 1.0;
        }
        v
    }
}

/// Most likely roles per slot; ties resolved P > N > I.
pub fn hard_rules(r: &RoleTensor) -> SymbolicRuleSet {
    let roles = r
        .probs
        .chunks(3)
        .map(|s| Role::from_index(math::argmax(s)))
        .collect();
    SymbolicRuleSet::from_roles(r.n_concepts, r.n_rules, roles).expect("role tensor shape is consistent")
}

/// One categorical draw per slot.
pub fn sample_roles<R: Rng + ?Sized>(r: &RoleTensor, rng: &mut R) -> SymbolicRuleSet {
    let roles = r
        .probs
        .chunks(3)
        .map(|s| {
            let u: f64 = rng.random();
            if u < s[0] {
                Role::Positive
            } else if u < s[0] + s[1] {
                Role::Negative
            } else {
                Role::Irrelevant
            }
        })
        .collect();
    SymbolicRuleSet::from_roles(r.n_concepts, r.n_rules, roles).expect("role tensor shape is consistent")
}

/// The directed acyclic graph implied by a rule set (edge `j -> i` when `j` is a parent of `i`).
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConceptGraph {
    pub n_concepts: usize,
    /// `(parent, child)` pairs sorted by child, then parent.
    pub edges: Vec<(usize, usize)>,
    pub topo_order: Vec<usize>,
    pub sources: Vec<usize>,
    pub sinks: Vec<usize>,
    /// Longest distance from any source.
    pub depth: Vec<usize>,
}

impl ConceptGraph {
    pub fn parents(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == i).map(|e| e.0)
    }

    pub fn children(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == i).map(|e| e.1)
    }

    /// Concepts reachable from `i`, excluding `i`.
    pub fn descendants(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(u) = stack.pop() {
            for c in self.children(u) {
                if seen.insert(c) {
                    stack.push(c);
                }
            }
        }
        seen
    }

    /// Concepts from which `i` is reachable, excluding `i`.
    pub fn ancestors(&self, i: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![i];
        while let Some(u) = stack.pop() {
            for p in self.parents(u) {
                if seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        seen
    }
}

/// Topological order of a parent matrix (`parent[i * n + j]`: `j -> i`).
///
/// Ready nodes are taken smallest index first. Returns `None` on a cycle.
pub fn topological_order(n: usize, parent: &[bool]) -> Option<Vec<usize>> {
    let mut indegree: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| parent[i * n + j]).count()).collect();
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(&u) = ready.iter().next() {
        ready.remove(&u);
        order.push(u);
        for c in 0..n {
            if parent[c * n + u] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.insert(c);
                }
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub fn derive_graph(rules: &SymbolicRuleSet) -> Result<ConceptGraph> {
    let n = rules.n_concepts;
    let topo_order = topological_order(n, &rules.parent)
        .ok_or_else(|| HcmrError::InvariantViolation("cycle detected in the concept graph".into()))?;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rules.is_parent(i, j) {
                edges.push((j, i));
            }
        }
    }
    let mut depth = vec![0usize; n];
    for &u in &topo_order {
        for j in 0..n {
            if rules.is_parent(u, j) {
                depth[u] = depth[u].max(depth[j] + 1);
            }
        }
    }
    let sources = (0..n).filter(|&i| rules.is_source(i)).collect();
    let sinks = (0..n).filter(|&j| !(0..n).any(|i| rules.is_parent(i, j))).collect();
    Ok(ConceptGraph {
        n_concepts: n,
        edges,
        topo_order,
        sources,
        sinks,
        depth,
    })
}
