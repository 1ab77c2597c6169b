mod common;

use hcmr_core::verification::{
    export_cnf, export_propositional, parse_formula, verify_constraint, Formula, PropositionalEncoding, Verdict,
};
use hcmr_core::{HcmrError, Role, SymbolicRuleSet};
use common::logic::{dpll, random_formula, random_memory, truth_table_holds};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// y = c0 with rules y <- c1 and y <- !c1 & c2.
fn example_memory() -> SymbolicRuleSet {
    let mut r = SymbolicRuleSet::empty(3, 2);
    r.set_role(0, 0, 1, Role::Positive);
    r.set_role(0, 1, 1, Role::Negative);
    r.set_role(0, 1, 2, Role::Positive);
    r
}

#[test]
fn second_rule_breaks_the_implication() {
    let enc = export_propositional(&example_memory());
    let Verdict::Violated(cx) = verify_constraint(&enc, &parse_formula("c1 -> c0").unwrap()).unwrap() else {
        panic!("the constraint should fail");
    };
    assert_eq!(cx.concepts[1], Some(true));
    assert_eq!(cx.concepts[0], Some(false));
    assert_eq!(cx.selections[0], Some(1));
    assert_eq!(cx.describe(), "c0=0 c1=1 c2=0 sel_0_1=1");
}

#[test]
fn tautologies_give_unsatisfiable_cnf() {
    let enc = export_propositional(&example_memory());
    let taut = parse_formula("c0 | !c0").unwrap();
    assert_eq!(verify_constraint(&enc, &taut).unwrap(), Verdict::Holds);
    assert!(dpll(&export_cnf(&enc, &taut).unwrap()).is_none());
    let falsifiable = parse_formula("c1 -> c0").unwrap();
    let model = dpll(&export_cnf(&enc, &falsifiable).unwrap()).expect("satisfiable");
    // a satisfying assignment of the CNF is itself a counterexample
    let c: Vec<bool> = model[..3].to_vec();
    assert!(c[1] && !c[0]);
}

#[test]
fn dimacs_header_counts_variables_and_clauses() {
    let enc = export_propositional(&example_memory());
    let cnf = export_cnf(&enc, &parse_formula("c1 -> c0").unwrap()).unwrap();
    let text = cnf.to_dimacs();
    let header = text.lines().find(|l| l.starts_with("p cnf")).unwrap();
    assert_eq!(header, format!("p cnf {} {}", cnf.n_vars, cnf.clauses.len()));
    assert_eq!(text.lines().filter(|l| l.ends_with(" 0")).count(), cnf.clauses.len());
    assert_eq!(cnf.var_of("sel_0_1"), Some(5));
}

#[test]
fn enumerator_and_cnf_agree_with_truth_tables() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 1..=5 {
        for nr in 1..=3 {
            for _ in 0..3 {
                let rules = random_memory(n, nr, &mut rng);
                let enc = export_propositional(&rules);
                for _ in 0..10 {
                    let f = random_formula(n, 3, &mut rng);
                    let expected = truth_table_holds(&rules, &f);
                    let verdict = verify_constraint(&enc, &f).unwrap();
                    assert_eq!(verdict == Verdict::Holds, expected, "{f} on {}", enc.to_text());
                    if let Verdict::Violated(cx) = verdict {
                        let values: Vec<bool> = cx.concepts.iter().map(|v| v.unwrap_or(false)).collect();
                        assert!(!f.eval(|a| values[a[1..].parse::<usize>().unwrap()]));
                    }
                    let sat = dpll(&export_cnf(&enc, &f).unwrap()).is_some();
                    assert_eq!(sat, !expected);
                }
            }
        }
    }
}

#[test]
fn encoding_text_round_trips_and_rebuilds_the_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..30 {
        let rules = random_memory(6, 3, &mut rng);
        let enc = export_propositional(&rules);
        let back = PropositionalEncoding::from_text(&enc.to_text()).unwrap();
        assert_eq!(back, enc);
        assert_eq!(back.to_rules().unwrap(), rules);
    }
}

#[test]
fn malformed_input_is_reported_with_a_position() {
    assert!(matches!(parse_formula("c0 & (c1"), Err(HcmrError::Parse { position: 8, .. })));
    assert!(matches!(PropositionalEncoding::from_text("concepts 2\nc1 <-> (sel_1_0 & c7)\n"), Err(HcmrError::Parse { .. })));
    assert_eq!(parse_formula("true").unwrap(), Formula::Const(true));
}

#[test]
fn large_cones_are_refused() {
    // 30 sources feeding one concept exceed the enumeration budget
    let n = 31;
    let mut rules = SymbolicRuleSet::empty(n, 1);
    for j in 0..30 {
        rules.set_role(30, 0, j, Role::Positive);
    }
    let enc = export_propositional(&rules);
    assert!(matches!(verify_constraint(&enc, &parse_formula("c30").unwrap()), Err(HcmrError::Tractability(_))));
    // but the CNF can still be produced
    assert!(export_cnf(&enc, &parse_formula("c30").unwrap()).is_ok());
}
