//! Acceptance criteria 1-10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails. Pass criterion numbers as arguments to run a
//! subset: `cargo test --test acceptance -- 6 7`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::time::{Duration, Instant};

use common::gradcheck;
use common::logic::{dpll, random_formula, random_memory, truth_table_holds};
use common::oracles::{brute_force_marginals, make_deterministic, random_input, random_model};
use common::tiny_config;
use hcmr_core::baseline::{train_baseline, BaselineModel};
use hcmr_core::constraints::{ConstraintSpec, InjectedRule, Literal, PriorityAssignment, PriorityValue};
use hcmr_core::datasets::{
    gen_synthetic_xor, xor_bayes_oracle, SyntheticXorSpec, XOR_CONCEPTS, XOR_INPUT_DIM, XOR_PARENTS,
};
use hcmr_core::inference::{infer_exact, infer_map};
use hcmr_core::intervention_eval::ConceptPredictor;
use hcmr_core::optim::AdamWConfig;
use hcmr_core::rule_memory::{self, RuleMemoryParams};
use hcmr_core::training::{concept_accuracy, train};
use hcmr_core::verification::{export_cnf, export_propositional, verify_constraint, Verdict};
use hcmr_core::{
    ConstraintSet, Dataset, FrozenModel, HcmrParams, InterventionAssignment, ModelConfig, TrainOptions, Trainable,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------- 1

/// Depth-first cycle search on the parent relation, independent of the library's topological sort.
fn has_cycle(n: usize, is_parent: impl Fn(usize, usize) -> bool) -> bool {
    fn visit(v: usize, n: usize, is_parent: &dyn Fn(usize, usize) -> bool, state: &mut [u8]) -> bool {
        state[v] = 1;
        for c in 0..n {
            if is_parent(c, v) {
                if state[c] == 1 || (state[c] == 0 && visit(c, n, is_parent, state)) {
                    return true;
                }
            }
        }
        state[v] = 2;
        false
    }
    let mut state = vec![0u8; n];
    (0..n).any(|v| state[v] == 0 && visit(v, n, &is_parent, &mut state))
}

fn dag_invariant() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut acyclic, mut edges) = (0, 0);
    for _ in 0..1000 {
        let n = rng.random_range(3..=12);
        let mut cfg = ModelConfig::new(n, 4);
        cfg.n_rules = rng.random_range(1..=5);
        let mut params = HcmrParams::new(&cfg, rng.random()).unwrap();
        let spread = rng.random_range(0.1..5.0);
        params.memory.priorities.iter_mut().for_each(|o| *o *= spread);
        let rules = params.hard_rules(None).unwrap();
        let ok = !has_cycle(n, |c, p| rules.is_parent(c, p)) && rule_memory::derive_graph(&rules).is_ok();
        acyclic += ok as usize;
        edges += (0..n).flat_map(|c| (0..n).map(move |p| (c, p))).filter(|&(c, p)| rules.is_parent(c, p)).count();
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        acyclic == 1000 && secs < 60.0 && edges > 0,
        format!("{acyclic}/1000 acyclic, {edges} edges in total, {secs:.1} s"),
    )
}

// ---------------------------------------------------------------- 2

fn graph_expressivity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut matched = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let mut perm: Vec<usize> = (0..n).collect();
        for t in (1..n).rev() {
            perm.swap(t, rng.random_range(0..=t));
        }
        let mut target = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(0.4) {
                    target.push((perm[a], perm[b]));
                }
            }
        }
        target.sort_unstable();
        let nr = rng.random_range(1..=3);
        let memory = RuleMemoryParams::for_graph(n, nr, &target).unwrap();
        let r_prime = rule_memory::decode_unadjusted_roles(&memory).unwrap();
        let r = rule_memory::adjust_roles(&r_prime, &memory.priorities, None).unwrap();
        let mut got = rule_memory::derive_graph(&rule_memory::hard_rules(&r)).unwrap().edges;
        got.sort_unstable();
        matched += (got == target) as usize;
    }
    outcome(matched == 100, format!("{matched}/100 edge sets reproduced"))
}

// ---------------------------------------------------------------- 3

fn exact_inference_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_exact: f64 = 0.0;
    for _ in 0..50 {
        let model = random_model(&mut rng);
        let x = random_input(&mut rng, 3);
        let exact = infer_exact(&x, &model, 20).unwrap();
        let oracle = brute_force_marginals(&x, &model);
        worst_exact = exact.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(worst_exact, f64::max);
    }
    let mut worst_map: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(2..=10);
        let nr = rng.random_range(1..=3);
        let mut params = HcmrParams::new(&tiny_config(n, nr, 3), rng.random()).unwrap();
        params.memory.priorities.iter_mut().for_each(|o| *o *= 3.0);
        make_deterministic(&mut params, &mut rng);
        let model = FrozenModel::new(&params, None).unwrap();
        let x = random_input(&mut rng, 3);
        let exact = infer_exact(&x, &model, 20).unwrap();
        let map = infer_map(&x, &model, &InterventionAssignment::new()).unwrap().probabilities();
        worst_map = map.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(worst_map, f64::max);
    }
    outcome(
        worst_exact <= 1e-9 && worst_map <= 1e-6,
        format!("max |exact - brute force| = {worst_exact:.1e}, max |MAP - exact| = {worst_map:.1e} (near-deterministic)"),
    )
}

// ---------------------------------------------------------------- 4

fn gradient_check() -> Outcome {
    let t = Instant::now();
    let mut worst = ("", 0.0f64);
    for seed in 0..3 {
        for (group, err) in gradcheck::all_group_errors(seed) {
            if err > worst.1 || err.is_nan() {
                worst = (group, err);
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        worst.1 <= gradcheck::TOL && secs < 60.0,
        format!("worst relative error {:.2e} ({}) at step 1e-5, {secs:.1} s", worst.1, worst.0),
    )
}

// ---------------------------------------------------------------- 5

/// C1 has the complementary rules C1 <- C0 and C1 <- !C0; only the selector learns.
fn universal_classifier() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inputs: Vec<Vec<f64>> = (0..16u32)
        .map(|v| (0..4).map(|b| if v >> b & 1 == 1 { 1.0 } else { -1.0 }).collect())
        .collect();
    let lit = |positive| Literal { concept: 0, positive };
    let spec = ConstraintSpec {
        force_source: vec![0],
        inject_rules: vec![
            InjectedRule { concept: 1, body: vec![lit(true)] },
            InjectedRule { concept: 1, body: vec![lit(false)] },
        ],
        priorities: vec![
            PriorityAssignment { concept: 0, value: PriorityValue::Absolute(1.0) },
            PriorityAssignment { concept: 1, value: PriorityValue::Absolute(0.0) },
        ],
        ..ConstraintSpec::default()
    };
    let mut cfg = ModelConfig::new(2, 4);
    cfg.n_rules = 2;
    // the frozen encoder is the selector's only view of x
    cfg.size_c_emb = 16;
    let cs = ConstraintSet::new(2, 2, spec).unwrap();
    let options = TrainOptions {
        epochs: 4000,
        batch_size: 16,
        optimizer: AdamWConfig { lr: 1e-2, ..AdamWConfig::default() },
        trainable: Trainable { encoder: false, selector: true, rule_memory: false },
        ..TrainOptions::default()
    };
    let mut fitted = 0;
    let mut worst = 1.0f64;
    for labeling in 0..20u64 {
        let mut data = Dataset::new(4, 2);
        for x in &inputs {
            data.push(x, &[false, rng.random()], &[false, true]).unwrap();
        }
        let (params, _) = train(&data, &data, &cfg, Some(&cs), &TrainOptions { seed: labeling, ..options.clone() }).unwrap();
        let acc = concept_accuracy(&FrozenModel::new(&params, Some(&cs)).unwrap(), &data).unwrap();
        fitted += (acc == 1.0) as usize;
        worst = worst.min(acc);
    }
    outcome(
        fitted == 20,
        format!("{fitted}/20 labelings fitted exactly within 4000 steps (worst train accuracy {worst:.4})"),
    )
}

// ---------------------------------------------------------------- 6 and 7

const XOR_TRAIN: usize = 10_000;
const XOR_TEST: usize = 5_000;

struct XorRun {
    seed: u64,
    train: Dataset,
    val: Dataset,
    test: Dataset,
    model: FrozenModel,
    elapsed: Duration,
}

fn train_xor_runs() -> Vec<XorRun> {
    (0..3)
        .map(|seed| {
            let data = gen_synthetic_xor(&SyntheticXorSpec::new(XOR_TRAIN), seed);
            let (train_data, val) = data.split_at(XOR_TRAIN * 4 / 5);
            let test = gen_synthetic_xor(&SyntheticXorSpec::new(XOR_TEST), seed + 1000);
            let cfg = ModelConfig::new(XOR_CONCEPTS, XOR_INPUT_DIM);
            let t = Instant::now();
            let (params, _) = train(&train_data, &val, &cfg, None, &TrainOptions { seed, ..TrainOptions::default() }).unwrap();
            XorRun {
                seed,
                model: FrozenModel::new(&params, None).unwrap(),
                elapsed: t.elapsed(),
                train: train_data,
                val,
                test,
            }
        })
        .collect()
}

fn xor_accuracy(runs: &[XorRun]) -> Outcome {
    let bayes = xor_bayes_oracle(&SyntheticXorSpec::new(XOR_TEST)).mean_accuracy();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let acc = concept_accuracy(&r.model, &r.test).unwrap();
        pass &= (acc - bayes).abs() <= 0.02 && r.elapsed.as_secs() < 600;
        parts.push(format!("seed {} {acc:.4} ({:.0} s)", r.seed, r.elapsed.as_secs_f64()));
    }
    outcome(pass, format!("Bayes {bayes:.4}; {}", parts.join(", ")))
}

/// Mean gain on the non-intervened concepts, and whether any of their predictions changed.
fn intervention_gain<M: ConceptPredictor>(model: &M, data: &Dataset, on: &[usize]) -> (f64, bool, f64) {
    let n = data.n_concepts;
    let rest: Vec<usize> = (0..n).filter(|i| !on.contains(i)).collect();
    let (mut gain, mut changed, mut correct_after) = (0i64, false, 0usize);
    for e in 0..data.len() {
        let truth = data.labels(e);
        let before = model.predict(data.x(e), &InterventionAssignment::new()).unwrap();
        let mut iv = InterventionAssignment::new();
        for &i in on {
            iv.insert(i, truth[i]);
        }
        let after = model.predict(data.x(e), &iv).unwrap();
        for &i in &rest {
            gain += (after[i] == truth[i]) as i64 - (before[i] == truth[i]) as i64;
            changed |= after[i] != before[i];
            correct_after += (after[i] == truth[i]) as usize;
        }
    }
    let total = (data.len() * rest.len()) as f64;
    (gain as f64 / total, changed, correct_after as f64 / total)
}

fn intervention_propagation(runs: &[XorRun]) -> Outcome {
    let on = [0, 1];
    let given = xor_bayes_oracle(&SyntheticXorSpec::new(XOR_TEST)).accuracies_given(&on);
    let ceiling = given[2..].iter().sum::<f64>() / (XOR_CONCEPTS - 2) as f64;
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let (delta, _, downstream) = intervention_gain(&r.model, &r.test, &on);
        let cfg = ModelConfig::new(XOR_CONCEPTS, XOR_INPUT_DIM);
        let (baseline, _): (BaselineModel, _) =
            train_baseline(&r.train, &r.val, &cfg, &TrainOptions { seed: r.seed, ..TrainOptions::default() }).unwrap();
        let (base_delta, base_changed, _) = intervention_gain(&baseline, &r.test, &on);
        let ok = delta > 0.0 && !base_changed && base_delta == 0.0 && downstream >= ceiling - 0.02;
        pass &= ok;
        parts.push(format!(
            "seed {}: delta {delta:+.4}, baseline delta {base_delta:+.4}, downstream {downstream:.4}",
            r.seed
        ));
    }
    outcome(pass, format!("ceiling {ceiling:.4}; {}", parts.join("; ")))
}

// ---------------------------------------------------------------- 8

fn injected_xor_constraints() -> ConstraintSet {
    let mut inject = Vec::new();
    for (i, parents) in XOR_PARENTS.iter().enumerate() {
        if let Some((a, b)) = *parents {
            let lit = |concept, positive| Literal { concept, positive };
            inject.push(InjectedRule { concept: i, body: vec![lit(a, true), lit(b, false)] });
            inject.push(InjectedRule { concept: i, body: vec![lit(a, false), lit(b, true)] });
        }
    }
    let priorities = [4.0, 4.0, 3.0, 2.0, 2.0, 1.0, 1.0]
        .iter()
        .enumerate()
        .map(|(concept, &v)| PriorityAssignment { concept, value: PriorityValue::Absolute(v) })
        .collect();
    let spec = ConstraintSpec {
        force_source: vec![0, 1],
        inject_rules: inject,
        priorities,
        pin_injected_selection: true,
        ..ConstraintSpec::default()
    };
    ConstraintSet::new(XOR_CONCEPTS, 2, spec).unwrap()
}

fn model_interventions() -> Outcome {
    let data = gen_synthetic_xor(&SyntheticXorSpec::new(XOR_TRAIN), 0);
    let test = gen_synthetic_xor(&SyntheticXorSpec::new(3000), 77);
    let cs = injected_xor_constraints();
    let mut cfg = ModelConfig::new(XOR_CONCEPTS, XOR_INPUT_DIM);
    cfg.n_rules = 2;
    let fit = |observe: &[usize]| {
        let (tr, va) = data.observe_only(observe).split_at(XOR_TRAIN * 4 / 5);
        let (params, _) = train(&tr, &va, &cfg, Some(&cs), &TrainOptions::default()).unwrap();
        FrozenModel::new(&params, Some(&cs)).unwrap()
    };

    let sources_only = fit(&[0, 1]);
    let mut agree = 0;
    for e in 0..test.len() {
        let pred = sources_only.predict(test.x(e), &InterventionAssignment::new()).unwrap();
        let mut symbolic = pred.clone();
        for (i, parents) in XOR_PARENTS.iter().enumerate() {
            if let Some((a, b)) = *parents {
                symbolic[i] = symbolic[a] ^ symbolic[b];
            }
        }
        agree += (symbolic == pred) as usize;
    }

    let nonsources_only = fit(&[2, 3, 4, 5, 6]);
    let (mut correct, mut total) = (0, 0);
    for e in 0..test.len() {
        let pred = nonsources_only.predict(test.x(e), &InterventionAssignment::new()).unwrap();
        for i in [0, 1] {
            correct += (pred[i] == test.labels(e)[i]) as usize;
            total += 1;
        }
    }
    let source_acc = correct as f64 / total as f64;
    outcome(
        agree == test.len() && source_acc >= 0.7,
        format!(
            "sources-only labels: {agree}/{} predictions equal symbolic propagation; non-source labels only: source accuracy {source_acc:.4} (chance 0.5)",
            test.len()
        ),
    )
}

// ---------------------------------------------------------------- 9

fn verification_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut agree, mut cnf_agree, mut total) = (0, 0, 0);
    for n in 1..=6 {
        for nr in 1..=3 {
            for _ in 0..4 {
                let rules = random_memory(n, nr, &mut rng);
                let enc = export_propositional(&rules);
                for _ in 0..20 {
                    let f = random_formula(n, 3, &mut rng);
                    let holds = truth_table_holds(&rules, &f);
                    let verdict = verify_constraint(&enc, &f).unwrap() == Verdict::Holds;
                    let sat = dpll(&export_cnf(&enc, &f).unwrap()).is_some();
                    total += 1;
                    agree += (verdict == holds) as usize;
                    cnf_agree += (sat == !verdict) as usize;
                }
            }
        }
    }
    outcome(
        agree == total && cnf_agree == total,
        format!("enumerator vs truth table {agree}/{total}, CNF satisfiability vs enumerator {cnf_agree}/{total}"),
    )
}

// ---------------------------------------------------------------- 10

fn scalability_shape() -> Outcome {
    let workload = |n: usize| {
        let mut cfg = ModelConfig::new(n, 4);
        cfg.n_rules = 4;
        let params = HcmrParams::new(&cfg, 10).unwrap();
        params.adjusted_roles(None).unwrap().probs.len()
    };
    let (small, large) = (workload(8), workload(16));
    let ratio = large as f64 / small as f64;
    outcome(
        (ratio - 4.0).abs() <= 0.2,
        format!("role-tensor entries {small} at n_C = 8, {large} at n_C = 16 (n_R = 4): ratio {ratio:.2}"),
    )
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let run = |k: u32| wanted.is_empty() || wanted.contains(&k);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |k: u32, name: &'static str, o: Outcome| {
        println!("criterion {k:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, name, o));
    };

    if run(1) {
        record(1, "DAG invariant", dag_invariant());
    }
    if run(2) {
        record(2, "graph expressivity", graph_expressivity());
    }
    if run(3) {
        record(3, "exact-inference oracle", exact_inference_oracle());
    }
    if run(4) {
        record(4, "gradient check", gradient_check());
    }
    if run(5) {
        record(5, "universal classifier", universal_classifier());
    }
    if run(6) || run(7) {
        let runs = train_xor_runs();
        if run(6) {
            record(6, "synthetic-XOR accuracy", xor_accuracy(&runs));
        }
        if run(7) {
            record(7, "intervention propagation", intervention_propagation(&runs));
        }
    }
    if run(8) {
        record(8, "model interventions", model_interventions());
    }
    if run(9) {
        record(9, "verification soundness", verification_soundness());
    }
    if run(10) {
        record(10, "scalability shape", scalability_shape());
    }

    let failed: Vec<String> = results.iter().filter(|r| !r.2.pass).map(|r| r.0.to_string()).collect();
    println!("acceptance: {}/{} passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
