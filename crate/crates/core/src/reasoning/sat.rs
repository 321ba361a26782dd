//! DPLL satisfiability solver.

use thiserror::Error;

/// Signed 1-based variable index; negative means negated.
pub type Lit = i32;

#[derive(Debug, Error, PartialEq)]
pub enum CnfError {
    #[error("empty clause")]
    EmptyClause,
    #[error("literal {lit} out of range for {vars} variables")]
    OutOfRange { lit: Lit, vars: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Cnf {
    num_vars: usize,
    clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn from_clauses(num_vars: usize, clauses: Vec<Vec<Lit>>) -> Result<Self, CnfError> {
        let mut cnf = Self::new(num_vars);
        for c in clauses {
            cnf.add_clause(c)?;
        }
        Ok(cnf)
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    /// Allocates a fresh variable and returns its index.
    pub fn fresh_var(&mut self) -> Lit {
        self.num_vars += 1;
        self.num_vars as Lit
    }

    pub fn add_clause(&mut self, clause: Vec<Lit>) -> Result<(), CnfError> {
        if clause.is_empty() {
            return Err(CnfError::EmptyClause);
        }
        if let Some(&lit) = clause
            .iter()
            .find(|l| **l == 0 || l.unsigned_abs() as usize > self.num_vars)
        {
            return Err(CnfError::OutOfRange {
                lit,
                vars: self.num_vars,
            });
        }
        self.clauses.push(clause);
        Ok(())
    }

    /// Whether `assignment` (indexed by variable, slot 0 unused) satisfies every clause.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        self.clauses
            .iter()
            .all(|c| c.iter().any(|&l| lit_value(assignment, l)))
    }
}

fn lit_value(assignment: &[bool], lit: Lit) -> bool {
    assignment[lit.unsigned_abs() as usize] == (lit > 0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatResult {
    /// Slot 0 is unused; slot `v` holds variable `v`.
    Sat(Vec<bool>),
    Unsat,
}

impl SatResult {
    pub fn is_sat(&self) -> bool {
        matches!(self, SatResult::Sat(_))
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Value {
    Unset,
    True,
    False,
}

fn value_of(assign: &[Value], lit: Lit) -> Value {
    match (assign[lit.unsigned_abs() as usize], lit > 0) {
        (Value::Unset, _) => Value::Unset,
        (Value::True, true) | (Value::False, false) => Value::True,
        _ => Value::False,
    }
}

fn set(assign: &mut [Value], lit: Lit) {
    assign[lit.unsigned_abs() as usize] = if lit > 0 { Value::True } else { Value::False };
}

/// Decides satisfiability. Branches on the lowest unassigned variable, true first.
pub fn solve(cnf: &Cnf) -> SatResult {
    let mut assign = vec![Value::Unset; cnf.num_vars + 1];
    if !dpll(cnf, &mut assign) {
        return SatResult::Unsat;
    }
    let model: Vec<bool> = assign.iter().map(|v| *v == Value::True).collect();
    assert!(cnf.satisfied_by(&model), "solver produced a non-model");
    SatResult::Sat(model)
}

fn dpll(cnf: &Cnf, assign: &mut Vec<Value>) -> bool {
    if !simplify(cnf, assign) {
        return false;
    }
    let Some(var) = (1..assign.len()).find(|&v| assign[v] == Value::Unset) else {
        return true;
    };
    for lit in [var as Lit, -(var as Lit)] {
        let mut trial = assign.clone();
        set(&mut trial, lit);
        if dpll(cnf, &mut trial) {
            *assign = trial;
            return true;
        }
    }
    false
}

/// Unit propagation and pure-literal elimination to a fixpoint.
/// Returns false on conflict.
fn simplify(cnf: &Cnf, assign: &mut [Value]) -> bool {
    loop {
        let mut changed = false;
        let mut polarity = vec![(false, false); assign.len()];
        for clause in &cnf.clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut satisfied = false;
            for &l in clause {
                match value_of(assign, l) {
                    Value::True => {
                        satisfied = true;
                        break;
                    }
                    Value::Unset => {
                        open += 1;
                        unassigned = Some(l);
                    }
                    Value::False => {}
                }
            }
            if satisfied {
                continue;
            }
            match (open, unassigned) {
                (0, _) => return false,
                (1, Some(l)) => {
                    set(assign, l);
                    changed = true;
                }
                _ => {
                    for &l in clause {
                        if value_of(assign, l) == Value::Unset {
                            let p = &mut polarity[l.unsigned_abs() as usize];
                            if l > 0 {
                                p.0 = true;
                            } else {
                                p.1 = true;
                            }
                        }
                    }
                }
            }
        }
        if changed {
            continue;
        }
        for (v, p) in polarity.iter().enumerate().skip(1) {
            if assign[v] != Value::Unset {
                continue;
            }
            match *p {
                (true, false) => {
                    assign[v] = Value::True;
                    changed = true;
                }
                (false, true) => {
                    assign[v] = Value::False;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return true;
        }
    }
}
