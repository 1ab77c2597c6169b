//! Concept-intervention policies and accuracy curves.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baseline::BaselineModel;
use crate::datasets::Dataset;
use crate::error::{HcmrError, Result};
use crate::inference::{self, InterventionAssignment};
use crate::model::FrozenModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PolicyKind {
    /// Shallowest concepts first.
    GraphSourcesFirst,
    /// Deepest concepts first.
    GraphSinksFirst,
    /// Probability closest to 0.5 first.
    Uncertainty,
    Random,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::GraphSourcesFirst => "graph_sources_first",
            PolicyKind::GraphSinksFirst => "graph_sinks_first",
            PolicyKind::Uncertainty => "uncertainty",
            PolicyKind::Random => "random",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            PolicyKind::GraphSourcesFirst,
            PolicyKind::GraphSinksFirst,
            PolicyKind::Uncertainty,
            PolicyKind::Random,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterventionPolicy {
    pub kind: PolicyKind,
    pub seed: u64,
}

impl InterventionPolicy {
    pub fn new(kind: PolicyKind) -> Self {
        InterventionPolicy { kind, seed: 0 }
    }
}

/// Something that predicts concepts and accepts interventions.
pub trait ConceptPredictor {
    fn n_concepts(&self) -> usize;
    /// Concept probabilities without interventions.
    fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn predict(&self, x: &[f64], interventions: &InterventionAssignment) -> Result<Vec<bool>>;
    /// Depth of each concept in the concept graph (all zero without a graph).
    fn depths(&self) -> Vec<usize>;
}

impl ConceptPredictor for FrozenModel {
    fn n_concepts(&self) -> usize {
        self.config.n_concepts
    }

    fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(inference::infer_map(x, self, &InterventionAssignment::new())?.probabilities())
    }

    fn predict(&self, x: &[f64], interventions: &InterventionAssignment) -> Result<Vec<bool>> {
        Ok(inference::infer_map(x, self, interventions)?.values())
    }

    fn depths(&self) -> Vec<usize> {
        self.graph.depth.clone()
    }
}

impl ConceptPredictor for BaselineModel {
    fn n_concepts(&self) -> usize {
        self.config.n_concepts
    }

    fn probabilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.predict_probs(x)
    }

    fn predict(&self, x: &[f64], interventions: &InterventionAssignment) -> Result<Vec<bool>> {
        BaselineModel::predict(self, x, interventions)
    }

    fn depths(&self) -> Vec<usize> {
        vec![0; self.config.n_concepts]
    }
}

/// Intervention order for one example.
pub fn make_order(policy: &InterventionPolicy, depths: &[usize], probs: &[f64], example: usize) -> Vec<usize> {
    let n = depths.len();
    let mut order: Vec<usize> = (0..n).collect();
    match policy.kind {
        PolicyKind::GraphSourcesFirst => order.sort_by_key(|&i| (depths[i], i)),
        PolicyKind::GraphSinksFirst => order.sort_by_key(|&i| (core::cmp::Reverse(depths[i]), i)),
        PolicyKind::Uncertainty => order.sort_by(|&a, &b| {
            let da = (probs[a] - 0.5).abs();
            let db = (probs[b] - 0.5).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        }),
        PolicyKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
            rng.set_stream(example as u64);
            order.shuffle(&mut rng);
        }
    }
    order
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub budget: usize,
    /// Concept accuracy with intervened concepts counted as correct.
    pub accuracy: f64,
    /// Accuracy change on the concepts that were not intervened on.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterventionCurve {
    pub policy: InterventionPolicy,
    pub points: Vec<CurvePoint>,
}

fn require_full_labels(data: &Dataset) -> Result<()> {
    if data.observed.iter().all(|&o| o) {
        Ok(())
    } else {
        Err(HcmrError::InvalidArgument(
            "interventions need ground truth for every concept of every example".into(),
        ))
    }
}

/// For each budget `b`, intervene on the first `b` concepts of each example's order.
pub fn evaluate_interventions<M: ConceptPredictor + ?Sized>(
    model: &M,
    data: &Dataset,
    policy: &InterventionPolicy,
    budgets: &[usize],
) -> Result<InterventionCurve> {
    require_full_labels(data)?;
    let n = model.n_concepts();
    if data.n_concepts != n {
        return Err(HcmrError::Shape("dataset and model disagree on the number of concepts".into()));
    }
    if let Some(&b) = budgets.iter().find(|&&b| b > n) {
        return Err(HcmrError::InvalidArgument(alloc::format!("budget {b} exceeds the {n} concepts")));
    }
    let depths = model.depths();
    let mut correct = vec![0usize; budgets.len()];
    let mut gain = vec![0i64; budgets.len()];
    let mut rest = vec![0usize; budgets.len()];
    for e in 0..data.len() {
        let x = data.x(e);
        let truth = data.labels(e);
        let probs = model.probabilities(x)?;
        let order = make_order(policy, &depths, &probs, e);
        let before = model.predict(x, &InterventionAssignment::new())?;
        for (t, &b) in budgets.iter().enumerate() {
            let mut iv = InterventionAssignment::new();
            for &i in &order[..b] {
                iv.insert(i, truth[i]);
            }
            let after = if b == 0 { before.clone() } else { model.predict(x, &iv)? };
            correct[t] += (0..n).filter(|&i| after[i] == truth[i]).count();
            for &i in &order[b..] {
                rest[t] += 1;
                gain[t] += (after[i] == truth[i]) as i64 - (before[i] == truth[i]) as i64;
            }
        }
    }
    let total = (data.len() * n).max(1) as f64;
    let points = budgets
        .iter()
        .enumerate()
        .map(|(t, &b)| CurvePoint {
            budget: b,
            accuracy: correct[t] as f64 / total,
            delta: if rest[t] == 0 { 0.0 } else { gain[t] as f64 / rest[t] as f64 },
        })
        .collect();
    Ok(InterventionCurve {
        policy: *policy,
        points,
    })
}

/// Per-concept accuracy after intervening on a fixed set of concepts.
pub fn per_concept_accuracy<M: ConceptPredictor + ?Sized>(model: &M, data: &Dataset, intervene_on: &[usize]) -> Result<Vec<f64>> {
    require_full_labels(data)?;
    let n = model.n_concepts();
    let mut correct = vec![0usize; n];
    for e in 0..data.len() {
        let truth = data.labels(e);
        let mut iv = InterventionAssignment::new();
        for &i in intervene_on {
            iv.insert(i, truth[i]);
        }
        let pred = model.predict(data.x(e), &iv)?;
        for i in 0..n {
            correct[i] += (pred[i] == truth[i]) as usize;
        }
    }
    let m = data.len().max(1) as f64;
    Ok(correct.iter().map(|&c| c as f64 / m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncertainty_order_sorts_by_distance_to_one_half() {
        let p = InterventionPolicy::new(PolicyKind::Uncertainty);
        assert_eq!(make_order(&p, &[0, 0, 0], &[0.9, 0.55, 0.2], 0), vec![1, 2, 0]);
    }

    #[test]
    fn graph_orders_follow_depth() {
        let depths = [0, 0, 1, 2];
        let p = InterventionPolicy::new(PolicyKind::GraphSourcesFirst);
        assert_eq!(make_order(&p, &depths, &[0.5; 4], 0), vec![0, 1, 2, 3]);
        let p = InterventionPolicy::new(PolicyKind::GraphSinksFirst);
        assert_eq!(make_order(&p, &depths, &[0.5; 4], 0), vec![3, 2, 0, 1]);
    }

    #[test]
    fn random_orders_are_seeded_per_example() {
        let p = InterventionPolicy {
            kind: PolicyKind::Random,
            seed: 4,
        };
        let d = [0; 10];
        let pr = [0.5; 10];
        assert_eq!(make_order(&p, &d, &pr, 3), make_order(&p, &d, &pr, 3));
        let mut sorted = make_order(&p, &d, &pr, 3);
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn policy_names_round_trip() {
        for k in [
            PolicyKind::GraphSourcesFirst,
            PolicyKind::GraphSinksFirst,
            PolicyKind::Uncertainty,
            PolicyKind::Random,
        ] {
            assert_eq!(PolicyKind::from_name(k.name()), Some(k));
        }
    }
}
