//! Propositional encoding of "context entails alert formula".
//!
//! `S ⊨ A` holds iff `S ∧ ¬A` is unsatisfiable. `¬A` is Tseitin-encoded once
//! per formula; each check then appends one unit clause per atom of `S`.

use super::sat::{solve, Cnf, Lit};
use crate::repository::{Atom, AtomValuation, Formula};

fn atom_var(a: Atom) -> Lit {
    a.index() as Lit + 1
}

/// The cached CNF of a negated alert formula.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledFormula {
    negated: Cnf,
}

impl CompiledFormula {
    pub fn new(formula: &Formula) -> Self {
        let mut cnf = Cnf::new(Atom::COUNT);
        let root = tseitin(formula, &mut cnf);
        cnf.add_clause(vec![-root])
            .expect("root literal is allocated");
        Self { negated: cnf }
    }

    /// `S ∧ ¬A` where `S` fixes every atom to its value in `valuation`.
    pub fn with_context(&self, valuation: &AtomValuation) -> Cnf {
        let mut cnf = self.negated.clone();
        for a in Atom::all() {
            let v = atom_var(a);
            let lit = if valuation.get(a) { v } else { -v };
            cnf.add_clause(vec![lit])
                .expect("atom variables are allocated");
        }
        cnf
    }

    pub fn negated(&self) -> &Cnf {
        &self.negated
    }
}

/// Returns a literal equivalent to `f`, adding defining clauses to `cnf`.
fn tseitin(f: &Formula, cnf: &mut Cnf) -> Lit {
    let add = |cnf: &mut Cnf, c: Vec<Lit>| cnf.add_clause(c).expect("literals are allocated");
    match f {
        Formula::Atom(a) => atom_var(*a),
        Formula::Not(inner) => -tseitin(inner, cnf),
        Formula::Const(b) => {
            let g = cnf.fresh_var();
            add(cnf, vec![if *b { g } else { -g }]);
            g
        }
        Formula::And(fs) => {
            let lits: Vec<Lit> = fs.iter().map(|x| tseitin(x, cnf)).collect();
            let g = cnf.fresh_var();
            for &l in &lits {
                add(cnf, vec![-g, l]);
            }
            add(
                cnf,
                std::iter::once(g).chain(lits.iter().map(|l| -l)).collect(),
            );
            g
        }
        Formula::Or(fs) => {
            let lits: Vec<Lit> = fs.iter().map(|x| tseitin(x, cnf)).collect();
            let g = cnf.fresh_var();
            for &l in &lits {
                add(cnf, vec![g, -l]);
            }
            add(
                cnf,
                std::iter::once(-g).chain(lits.iter().copied()).collect(),
            );
            g
        }
    }
}

/// One solver call: does the context entail the formula?
pub fn entails(compiled: &CompiledFormula, valuation: &AtomValuation) -> bool {
    !solve(&compiled.with_context(valuation)).is_sat()
}
