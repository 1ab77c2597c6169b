mod common;

use common::tiny_config;
use hcmr_core::constraints::ConstraintSpec;
use hcmr_core::inference::infer_map;
use hcmr_core::intervention_eval::{make_order, InterventionPolicy, PolicyKind};
use hcmr_core::rule_memory::{self, RuleMemoryParams};
use hcmr_core::verification::export_propositional;
use hcmr_core::{ConstraintSet, FrozenModel, HcmrParams, InterventionAssignment, Role};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params_strategy() -> impl Strategy<Value = HcmrParams> {
    (3usize..=12, 1usize..=5, any::<u64>(), 0.5f64..4.0).prop_map(|(n, nr, seed, spread)| {
        let mut p = HcmrParams::new(&tiny_config(n, nr, 2), seed).unwrap();
        for o in p.memory.priorities.iter_mut() {
            *o *= spread;
        }
        p
    })
}

/// A DAG as `(parent, child)` pairs with parents drawn from a random permutation prefix.
fn dag_strategy() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1usize..=8)
        .prop_flat_map(|n| {
            let perm = Just((0..n).collect::<Vec<usize>>()).prop_shuffle();
            (Just(n), perm, proptest::collection::vec(any::<bool>(), n * n))
        })
        .prop_map(|(n, perm, bits)| {
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if bits[a * n + b] {
                        edges.push((perm[a], perm[b]));
                    }
                }
            }
            edges.sort_unstable();
            (n, edges)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoded_graphs_are_acyclic_and_respect_priorities(p in params_strategy()) {
        let rules = p.hard_rules(None).unwrap();
        let graph = rule_memory::derive_graph(&rules).unwrap();
        let o = &p.memory.priorities;
        for &(parent, child) in &graph.edges {
            prop_assert!(o[parent] > o[child]);
        }
        prop_assert_eq!(graph.topo_order.len(), rules.n_concepts);
    }

    #[test]
    fn adjusted_roles_stay_normalised(p in params_strategy()) {
        let r = p.adjusted_roles(None).unwrap();
        prop_assert!(r.max_normalization_error() < 1e-9);
        prop_assert!(r.probs.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn sampled_roles_never_use_blocked_slots(p in params_strategy(), seed in any::<u64>()) {
        let r = p.adjusted_roles(None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = rule_memory::sample_roles(&r, &mut rng);
        let o = &p.memory.priorities;
        let n = s.n_concepts;
        for i in 0..n {
            for k in 0..s.n_rules {
                for j in 0..n {
                    if o[j] <= o[i] {
                        prop_assert_eq!(s.role(i, k, j), Role::Irrelevant);
                    }
                }
            }
        }
        prop_assert!(rule_memory::derive_graph(&s).is_ok());
    }

    #[test]
    fn forced_sources_hold_for_any_parameters(p in params_strategy(), pick in any::<u64>()) {
        let n = p.config.n_concepts;
        let forced = (pick % n as u64) as usize;
        let spec = ConstraintSpec { force_source: vec![forced], ..ConstraintSpec::default() };
        let cs = ConstraintSet::new(n, p.config.n_rules, spec).unwrap();
        let rules = p.hard_rules(Some(&cs)).unwrap();
        prop_assert!(rules.is_source(forced));
    }

    #[test]
    fn constructed_parameters_reproduce_the_dag((n, edges) in dag_strategy(), nr in 1usize..=3) {
        let memory = RuleMemoryParams::for_graph(n, nr, &edges).unwrap();
        let r = rule_memory::adjust_roles(&rule_memory::decode_unadjusted_roles(&memory).unwrap(), &memory.priorities, None).unwrap();
        let graph = rule_memory::derive_graph(&rule_memory::hard_rules(&r)).unwrap();
        let mut got = graph.edges.clone();
        got.sort_unstable();
        prop_assert_eq!(got, edges);
    }

    #[test]
    fn map_traces_satisfy_the_propositional_encoding(p in params_strategy(), x in proptest::collection::vec(-2.0f64..2.0, 2)) {
        let model = FrozenModel::new(&p, None).unwrap();
        let trace = infer_map(&x, &model, &InterventionAssignment::new()).unwrap();
        let n = model.rules.n_concepts;
        let mut selections = vec![None; n];
        for c in &trace.concepts {
            selections[c.concept] = c.selected_rule;
        }
        prop_assert!(export_propositional(&model.rules).satisfied_by(&trace.values(), &selections));
    }

    #[test]
    fn intervention_orders_are_permutations(
        depths in proptest::collection::vec(0usize..4, 1..10),
        seed in any::<u64>(),
        example in 0usize..100,
        kind in prop_oneof![
            Just(PolicyKind::GraphSourcesFirst),
            Just(PolicyKind::GraphSinksFirst),
            Just(PolicyKind::Uncertainty),
            Just(PolicyKind::Random),
        ],
    ) {
        let probs: Vec<f64> = depths.iter().enumerate().map(|(i, _)| (i as f64 * 0.37) % 1.0).collect();
        let policy = InterventionPolicy { kind, seed };
        let order = make_order(&policy, &depths, &probs, example);
        let mut sorted = order.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..depths.len()).collect::<Vec<_>>());
        prop_assert_eq!(&order, &make_order(&policy, &depths, &probs, example));
        if kind == PolicyKind::GraphSourcesFirst {
            prop_assert!(order.windows(2).all(|w| depths[w[0]] <= depths[w[1]]));
        }
    }
}
