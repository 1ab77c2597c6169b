//! Propositional view of a rule memory and constraint checking.
//!
//! Each non-source concept `i` is encoded as
//! `c<i> <-> (sel_<i>_0 & body_0) | ... | (sel_<i>_{R-1} & body_{R-1})`
//! with exactly one `sel_<i>_k` true. Selection atoms are free: a constraint
//! holds only if it holds for every rule the selector could pick.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{HcmrError, Result};
use crate::rule_memory::{derive_graph, Role, SymbolicRuleSet};

/// Enumeration is refused beyond `2^MAX_ENUMERATION_BITS` assignments.
pub const MAX_ENUMERATION_BITS: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Const(bool),
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(name: &str) -> Self {
        Formula::Atom(name.to_string())
    }

    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Self {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_atoms(&mut s);
        s
    }

    fn collect_atoms(&self, s: &mut BTreeSet<String>) {
        match self {
            Formula::Const(_) => {}
            Formula::Atom(a) => {
                s.insert(a.clone());
            }
            Formula::Not(f) => f.collect_atoms(s),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect_atoms(s);
                b.collect_atoms(s);
            }
        }
    }

    /// Evaluates with `value` giving the truth of each atom.
    pub fn eval<F: Fn(&str) -> bool + Copy>(&self, value: F) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Atom(a) => value(a),
            Formula::Not(f) => !f.eval(value),
            Formula::And(a, b) => a.eval(value) && b.eval(value),
            Formula::Or(a, b) => a.eval(value) || b.eval(value),
            Formula::Implies(a, b) => !a.eval(value) || b.eval(value),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Const(true) => write!(f, "true"),
            Formula::Const(false) => write!(f, "false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => write!(f, "!{x}"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Atom(String),
    Not,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
}

fn tokenize(s: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    let mut t = 0;
    while t < chars.len() {
        let (pos, c) = chars[t];
        let next = chars.get(t + 1).map(|x| x.1);
        let next2 = chars.get(t + 2).map(|x| x.1);
        t += 1;
        let tok = match c {
            ' ' | '\t' | '\n' | '\r' => continue,
            '!' | '~' | '¬' => Token::Not,
            '&' | '∧' => {
                if next == Some('&') {
                    t += 1;
                }
                Token::And
            }
            '|' | '∨' => {
                if next == Some('|') {
                    t += 1;
                }
                Token::Or
            }
            '→' => Token::Implies,
            '↔' => Token::Iff,
            '-' if next == Some('>') => {
                t += 1;
                Token::Implies
            }
            '<' if next == Some('-') && next2 == Some('>') => {
                t += 2;
                Token::Iff
            }
            '(' => Token::LParen,
            ')' => Token::RParen,
            c if c.is_ascii_alphanumeric() || c == '_' => {
                let mut name = String::from(c);
                while t < chars.len() && (chars[t].1.is_ascii_alphanumeric() || chars[t].1 == '_') {
                    name.push(chars[t].1);
                    t += 1;
                }
                Token::Atom(name)
            }
            other => {
                return Err(HcmrError::Parse {
                    position: pos,
                    message: format!("unexpected character '{other}'"),
                })
            }
        };
        out.push((pos, tok));
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at).map(|t| &t.1)
    }

    fn pos(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, message: &str) -> Result<T> {
        Err(HcmrError::Parse {
            position: self.pos(),
            message: message.to_string(),
        })
    }

    // iff < implies (right-assoc) < or < and < not
    fn iff(&mut self) -> Result<Formula> {
        let mut lhs = self.implication()?;
        while self.peek() == Some(&Token::Iff) {
            self.at += 1;
            let rhs = self.implication()?;
            lhs = Formula::and(Formula::implies(lhs.clone(), rhs.clone()), Formula::implies(rhs, lhs));
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Token::Implies) {
            self.at += 1;
            let rhs = self.implication()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Token::Or) {
            self.at += 1;
            lhs = Formula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut lhs = self.unary()?;
        while self.peek() == Some(&Token::And) {
            self.at += 1;
            lhs = Formula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().cloned() {
            Some(Token::Not) => {
                self.at += 1;
                Ok(Formula::not(self.unary()?))
            }
            Some(Token::LParen) => {
                self.at += 1;
                let f = self.iff()?;
                if self.peek() != Some(&Token::RParen) {
                    return self.err("expected ')'");
                }
                self.at += 1;
                Ok(f)
            }
            Some(Token::Atom(a)) => {
                self.at += 1;
                Ok(match a.as_str() {
                    "true" => Formula::Const(true),
                    "false" => Formula::Const(false),
                    _ => Formula::Atom(a),
                })
            }
            Some(_) => self.err("expected an atom, '!' or '('"),
            None => self.err("unexpected end of formula"),
        }
    }
}

/// Parses `!`, `&`, `|`, `->`, `<->` (and their Unicode forms) over atom names.
pub fn parse_formula(s: &str) -> Result<Formula> {
    let mut p = Parser {
        tokens: tokenize(s)?,
        at: 0,
        end: s.len(),
    };
    let f = p.iff()?;
    if p.at != p.tokens.len() {
        return p.err("unexpected trailing input");
    }
    Ok(f)
}

pub fn concept_atom(i: usize) -> String {
    format!("c{i}")
}

pub fn selection_atom(i: usize, k: usize) -> String {
    format!("sel_{i}_{k}")
}

/// Concept index of a `c<i>` atom.
pub fn parse_concept_atom(a: &str) -> Option<usize> {
    let digits = a.strip_prefix('c')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Definition of one non-source concept.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConceptDefinition {
    pub concept: usize,
    /// Rule bodies in rule order; rule `k` is guarded by `sel_<concept>_<k>`.
    pub bodies: Vec<Vec<(usize, bool)>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropositionalEncoding {
    pub n_concepts: usize,
    pub definitions: Vec<ConceptDefinition>,
}

/// Encodes hard rules as propositional definitions.
pub fn export_propositional(rules: &SymbolicRuleSet) -> PropositionalEncoding {
    let definitions = (0..rules.n_concepts)
        .filter(|&i| !rules.is_source(i))
        .map(|i| ConceptDefinition {
            concept: i,
            bodies: (0..rules.n_rules).map(|k| rules.literals(i, k)).collect(),
        })
        .collect();
    PropositionalEncoding {
        n_concepts: rules.n_concepts,
        definitions,
    }
}

impl PropositionalEncoding {
    pub fn definition(&self, i: usize) -> Option<&ConceptDefinition> {
        self.definitions.iter().find(|d| d.concept == i)
    }

    pub fn is_source(&self, i: usize) -> bool {
        self.definition(i).is_none()
    }

    /// Every atom: concept atoms first, then selection atoms.
    pub fn atoms(&self) -> Vec<String> {
        let mut v: Vec<String> = (0..self.n_concepts).map(concept_atom).collect();
        for d in &self.definitions {
            for k in 0..d.bodies.len() {
                v.push(selection_atom(d.concept, k));
            }
        }
        v
    }

    /// Rule set equivalent to this encoding.
    pub fn to_rules(&self) -> Result<SymbolicRuleSet> {
        let n_rules = self.definitions.iter().map(|d| d.bodies.len()).max().unwrap_or(1);
        let n = self.n_concepts;
        let mut roles = vec![Role::Irrelevant; n * n_rules * n];
        for d in &self.definitions {
            for (k, body) in d.bodies.iter().enumerate() {
                for &(j, pos) in body {
                    roles[(d.concept * n_rules + k) * n + j] = if pos { Role::Positive } else { Role::Negative };
                }
            }
        }
        SymbolicRuleSet::from_roles(n, n_rules, roles)
    }

    /// One line per definition plus a header with the concept count.
    pub fn to_text(&self) -> String {
        let mut s = format!("concepts {}\n", self.n_concepts);
        for d in &self.definitions {
            let alts: Vec<String> = d
                .bodies
                .iter()
                .enumerate()
                .map(|(k, body)| {
                    let mut parts = vec![selection_atom(d.concept, k)];
                    parts.extend(body.iter().map(|&(j, pos)| {
                        if pos {
                            concept_atom(j)
                        } else {
                            format!("!{}", concept_atom(j))
                        }
                    }));
                    format!("({})", parts.join(" & "))
                })
                .collect();
            s.push_str(&format!("{} <-> {}\n", concept_atom(d.concept), alts.join(" | ")));
            let sels: Vec<String> = (0..d.bodies.len()).map(|k| selection_atom(d.concept, k)).collect();
            s.push_str(&format!("exactly_one({})\n", sels.join(", ")));
        }
        s
    }

    /// Parses the output of [`PropositionalEncoding::to_text`].
    pub fn from_text(text: &str) -> Result<Self> {
        let perr = |line: usize, message: String| HcmrError::Parse { position: line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (ln, header) = lines.next().ok_or_else(|| perr(1, "empty encoding".into()))?;
        let n_concepts: usize = header
            .trim()
            .strip_prefix("concepts ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| perr(ln + 1, "expected 'concepts <n>'".into()))?;
        let mut definitions = Vec::new();
        for (ln, line) in lines {
            let line = line.trim();
            if line.starts_with("exactly_one(") {
                continue;
            }
            let (head, rhs) = line
                .split_once("<->")
                .ok_or_else(|| perr(ln + 1, "expected '<->'".into()))?;
            let concept = parse_concept_atom(head.trim())
                .filter(|&c| c < n_concepts)
                .ok_or_else(|| perr(ln + 1, format!("bad concept atom '{}'", head.trim())))?;
            let mut bodies = Vec::new();
            for (k, alt) in rhs.split('|').enumerate() {
                let alt = alt.trim().trim_start_matches('(').trim_end_matches(')');
                let mut parts = alt.split('&').map(str::trim);
                if parts.next() != Some(selection_atom(concept, k).as_str()) {
                    return Err(perr(ln + 1, format!("alternative {k} must start with {}", selection_atom(concept, k))));
                }
                let mut body = Vec::new();
                for lit in parts {
                    let (pos, atom) = match lit.strip_prefix('!') {
                        Some(a) => (false, a),
                        None => (true, lit),
                    };
                    let j = parse_concept_atom(atom)
                        .filter(|&j| j < n_concepts)
                        .ok_or_else(|| perr(ln + 1, format!("bad literal '{lit}'")))?;
                    body.push((j, pos));
                }
                bodies.push(body);
            }
            definitions.push(ConceptDefinition { concept, bodies });
        }
        Ok(PropositionalEncoding {
            n_concepts,
            definitions,
        })
    }

    /// Whether concept values and selections (one per non-source) satisfy every definition.
    pub fn satisfied_by(&self, values: &[bool], selections: &[Option<usize>]) -> bool {
        self.definitions.iter().all(|d| match selections.get(d.concept).copied().flatten() {
            Some(k) if k < d.bodies.len() => {
                values[d.concept] == d.bodies[k].iter().all(|&(j, pos)| values[j] == pos)
            }
            _ => false,
        })
    }
}

/// A consistent assignment that falsifies the constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    /// Values of the concepts involved (`None` outside the checked cone).
    pub concepts: Vec<Option<bool>>,
    /// Selected rule of each non-source concept in the cone.
    pub selections: Vec<Option<usize>>,
}

impl Counterexample {
    pub fn describe(&self) -> String {
        let mut parts = Vec::new();
        for (i, v) in self.concepts.iter().enumerate() {
            if let Some(v) = v {
                parts.push(format!("{}={}", concept_atom(i), *v as u8));
            }
        }
        for (i, s) in self.selections.iter().enumerate() {
            if let Some(k) = s {
                parts.push(format!("{}=1", selection_atom(i, *k)));
            }
        }
        parts.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated(Counterexample),
}

fn resolve_atoms(enc: &PropositionalEncoding, constraint: &Formula) -> Result<Vec<usize>> {
    constraint
        .atoms()
        .iter()
        .map(|a| {
            parse_concept_atom(a)
                .filter(|&i| i < enc.n_concepts)
                .ok_or_else(|| HcmrError::InvalidArgument(format!("constraint refers to undeclared atom '{a}'")))
        })
        .collect()
}

/// Checks the constraint under every assignment to the free atoms it depends on.
pub fn verify_constraint(enc: &PropositionalEncoding, constraint: &Formula) -> Result<Verdict> {
    let referenced = resolve_atoms(enc, constraint)?;
    let rules = enc.to_rules()?;
    let graph = derive_graph(&rules)?;
    let mut cone: BTreeSet<usize> = referenced.iter().copied().collect();
    for &i in &referenced {
        cone.extend(graph.ancestors(i));
    }
    let order: Vec<usize> = graph.topo_order.iter().copied().filter(|i| cone.contains(i)).collect();
    // mixed-radix digits: 2 per source, n_R per non-source
    let radix: Vec<usize> = order
        .iter()
        .map(|&i| enc.definition(i).map_or(2, |d| d.bodies.len()))
        .collect();
    let bits: f64 = radix.iter().map(|&r| libm::log2(r as f64)).sum();
    if bits > MAX_ENUMERATION_BITS {
        return Err(HcmrError::Tractability(format!(
            "checking needs 2^{bits:.1} assignments (limit 2^{MAX_ENUMERATION_BITS}); export CNF and use a SAT solver"
        )));
    }
    let n = enc.n_concepts;
    let mut digits = vec![0usize; order.len()];
    let mut values = vec![false; n];
    loop {
        let mut selections = vec![None; n];
        for (t, &i) in order.iter().enumerate() {
            match enc.definition(i) {
                None => values[i] = digits[t] == 1,
                Some(d) => {
                    let k = digits[t];
                    selections[i] = Some(k);
                    values[i] = d.bodies[k].iter().all(|&(j, pos)| values[j] == pos);
                }
            }
        }
        let holds = constraint.eval(|a| parse_concept_atom(a).map(|i| values[i]).unwrap_or(false));
        if !holds {
            let concepts = (0..n).map(|i| cone.contains(&i).then_some(values[i])).collect();
            return Ok(Verdict::Violated(Counterexample { concepts, selections }));
        }
        // increment
        let mut t = 0;
        loop {
            if t == digits.len() {
                return Ok(Verdict::Holds);
            }
            digits[t] += 1;
            if digits[t] < radix[t] {
                break;
            }
            digits[t] = 0;
            t += 1;
        }
    }
}

/// Clauses over numbered variables (`1..=n_vars`), negative literals negated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub n_vars: usize,
    pub clauses: Vec<Vec<i64>>,
    /// Variable number of each named atom.
    pub names: Vec<(usize, String)>,
}

impl Cnf {
    /// Numbered-literal text with a comment block naming the atoms.
    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        s.push_str("c satisfiable iff the constraint can be violated\n");
        for (v, name) in &self.names {
            s.push_str(&format!("c var {v} {name}\n"));
        }
        s.push_str(&format!("p cnf {} {}\n", self.n_vars, self.clauses.len()));
        for c in &self.clauses {
            for l in c {
                s.push_str(&format!("{l} "));
            }
            s.push_str("0\n");
        }
        s
    }

    pub fn var_of(&self, name: &str) -> Option<usize> {
        self.names.iter().find(|(_, n)| n == name).map(|(v, _)| *v)
    }

    /// Whether `assignment[v - 1]` satisfies every clause.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter().any(|&l| {
                let v = assignment[l.unsigned_abs() as usize - 1];
                if l > 0 {
                    v
                } else {
                    !v
                }
            })
        })
    }
}

struct CnfBuilder {
    n_vars: usize,
    clauses: Vec<Vec<i64>>,
}

impl CnfBuilder {
    fn fresh(&mut self) -> i64 {
        self.n_vars += 1;
        self.n_vars as i64
    }

    fn tseitin(&mut self, f: &Formula, atom: &dyn Fn(&str) -> i64) -> i64 {
        match f {
            Formula::Atom(a) => atom(a),
            Formula::Const(b) => {
                let v = self.fresh();
                self.clauses.push(vec![if *b { v } else { -v }]);
                v
            }
            Formula::Not(x) => -self.tseitin(x, atom),
            Formula::And(a, b) => {
                let (a, b) = (self.tseitin(a, atom), self.tseitin(b, atom));
                let v = self.fresh();
                self.clauses.push(vec![-v, a]);
                self.clauses.push(vec![-v, b]);
                self.clauses.push(vec![v, -a, -b]);
                v
            }
            Formula::Or(a, b) => {
                let (a, b) = (self.tseitin(a, atom), self.tseitin(b, atom));
                let v = self.fresh();
                self.clauses.push(vec![-v, a, b]);
                self.clauses.push(vec![v, -a]);
                self.clauses.push(vec![v, -b]);
                v
            }
            Formula::Implies(a, b) => {
                let (a, b) = (self.tseitin(a, atom), self.tseitin(b, atom));
                let v = self.fresh();
                self.clauses.push(vec![-v, -a, b]);
                self.clauses.push(vec![v, a]);
                self.clauses.push(vec![v, -b]);
                v
            }
        }
    }
}

/// CNF of `encoding ∧ ¬constraint`: satisfiable exactly when the constraint can be violated.
pub fn export_cnf(enc: &PropositionalEncoding, constraint: &Formula) -> Result<Cnf> {
    resolve_atoms(enc, constraint)?;
    let n = enc.n_concepts;
    let mut names: Vec<(usize, String)> = (0..n).map(|i| (i + 1, concept_atom(i))).collect();
    let mut b = CnfBuilder {
        n_vars: n,
        clauses: Vec::new(),
    };
    for d in &enc.definitions {
        let c = (d.concept + 1) as i64;
        let sels: Vec<i64> = (0..d.bodies.len())
            .map(|k| {
                let v = b.fresh();
                names.push((v as usize, selection_atom(d.concept, k)));
                v
            })
            .collect();
        b.clauses.push(sels.clone());
        for x in 0..sels.len() {
            for y in x + 1..sels.len() {
                b.clauses.push(vec![-sels[x], -sels[y]]);
            }
        }
        let mut terms = Vec::with_capacity(sels.len());
        for (k, body) in d.bodies.iter().enumerate() {
            let t = b.fresh();
            let lits: Vec<i64> = body
                .iter()
                .map(|&(j, pos)| if pos { (j + 1) as i64 } else { -((j + 1) as i64) })
                .collect();
            b.clauses.push(vec![-t, sels[k]]);
            for &l in &lits {
                b.clauses.push(vec![-t, l]);
            }
            let mut back = vec![t, -sels[k]];
            back.extend(lits.iter().map(|l| -l));
            b.clauses.push(back);
            terms.push(t);
        }
        let mut fwd = vec![-c];
        fwd.extend(&terms);
        b.clauses.push(fwd);
        for &t in &terms {
            b.clauses.push(vec![c, -t]);
        }
    }
    let atom = |a: &str| -> i64 { (parse_concept_atom(a).expect("atoms resolved above") + 1) as i64 };
    let root = b.tseitin(constraint, &atom);
    b.clauses.push(vec![-root]);
    Ok(Cnf {
        n_vars: b.n_vars,
        clauses: b.clauses,
        names,
    })
}
