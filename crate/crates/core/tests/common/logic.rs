#![allow(dead_code)]

//! Independent logic oracles: truth tables and a small DPLL solver.

use hcmr_core::verification::{Cnf, Formula};
use hcmr_core::{Role, SymbolicRuleSet};
use rand::Rng;

/// Memory whose parents always precede their children in a random permutation.
pub fn random_memory<R: Rng>(n: usize, nr: usize, rng: &mut R) -> SymbolicRuleSet {
    let mut perm: Vec<usize> = (0..n).collect();
    for t in (1..n).rev() {
        perm.swap(t, rng.random_range(0..=t));
    }
    let mut rules = SymbolicRuleSet::empty(n, nr);
    for (t, &i) in perm.iter().enumerate() {
        if rng.random_bool(0.3) {
            continue;
        }
        for k in 0..nr {
            for &j in &perm[..t] {
                let role = match rng.random_range(0..5) {
                    0 => Role::Positive,
                    1 => Role::Negative,
                    _ => Role::Irrelevant,
                };
                rules.set_role(i, k, j, role);
            }
        }
    }
    rules
}

pub fn random_formula<R: Rng>(n: usize, depth: usize, rng: &mut R) -> Formula {
    if depth == 0 || rng.random_bool(0.25) {
        return Formula::atom(&format!("c{}", rng.random_range(0..n)));
    }
    match rng.random_range(0..4) {
        0 => Formula::not(random_formula(n, depth - 1, rng)),
        1 => Formula::and(random_formula(n, depth - 1, rng), random_formula(n, depth - 1, rng)),
        2 => Formula::or(random_formula(n, depth - 1, rng), random_formula(n, depth - 1, rng)),
        _ => Formula::implies(random_formula(n, depth - 1, rng), random_formula(n, depth - 1, rng)),
    }
}

fn body_holds(rules: &SymbolicRuleSet, i: usize, k: usize, c: &[bool]) -> bool {
    (0..rules.n_concepts).all(|j| match rules.role(i, k, j) {
        Role::Positive => c[j],
        Role::Negative => !c[j],
        Role::Irrelevant => true,
    })
}

/// Whether `f` holds under every concept assignment consistent with some rule selection.
pub fn truth_table_holds(rules: &SymbolicRuleSet, f: &Formula) -> bool {
    let n = rules.n_concepts;
    for mask in 0u32..(1 << n) {
        let c: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        // some selection makes every non-source agree with its chosen rule
        let consistent = (0..n).all(|i| rules.is_source(i) || (0..rules.n_rules).any(|k| body_holds(rules, i, k, &c) == c[i]));
        if consistent && !f.eval(|a| c[a[1..].parse::<usize>().unwrap()]) {
            return false;
        }
    }
    true
}

/// DPLL with unit propagation; returns a model when satisfiable.
pub fn dpll(cnf: &Cnf) -> Option<Vec<bool>> {
    let mut assign: Vec<Option<bool>> = vec![None; cnf.n_vars + 1];
    if solve(&cnf.clauses, &mut assign) {
        Some(assign[1..].iter().map(|v| v.unwrap_or(false)).collect())
    } else {
        None
    }
}

fn lit_value(assign: &[Option<bool>], l: i64) -> Option<bool> {
    assign[l.unsigned_abs() as usize].map(|v| if l > 0 { v } else { !v })
}

fn solve(clauses: &[Vec<i64>], assign: &mut Vec<Option<bool>>) -> bool {
    let mut trail = Vec::new();
    loop {
        let mut changed = false;
        for c in clauses {
            let mut unassigned = None;
            let mut count = 0;
            let mut sat = false;
            for &l in c {
                match lit_value(assign, l) {
                    Some(true) => {
                        sat = true;
                        break;
                    }
                    Some(false) => {}
                    None => {
                        count += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if sat {
                continue;
            }
            match (count, unassigned) {
                (0, _) => {
                    for v in trail {
                        assign[v] = None;
                    }
                    return false;
                }
                (1, Some(l)) => {
                    let v = l.unsigned_abs() as usize;
                    assign[v] = Some(l > 0);
                    trail.push(v);
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }
    let Some(v) = (1..assign.len()).find(|&v| assign[v].is_none()) else {
        return true;
    };
    for value in [true, false] {
        assign[v] = Some(value);
        if solve(clauses, assign) {
            return true;
        }
        assign[v] = None;
    }
    for v in trail {
        assign[v] = None;
    }
    false
}
