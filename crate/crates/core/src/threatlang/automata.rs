//! Thompson NFAs, subset construction and Hopcroft minimization.

use super::{Regex, Token};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NfaState {
    pub epsilon: Vec<usize>,
    pub transitions: Vec<(Token, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nfa {
    pub states: Vec<NfaState>,
    pub start: usize,
    pub accept: usize,
}

impl Nfa {
    /// An automaton accepting nothing.
    pub fn empty() -> Self {
        Self {
            states: vec![NfaState::default(), NfaState::default()],
            start: 0,
            accept: 1,
        }
    }

    fn add_state(&mut self) -> usize {
        self.states.push(NfaState::default());
        self.states.len() - 1
    }

    pub fn epsilon_closure(&self, seed: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut set: BTreeSet<usize> = BTreeSet::new();
        let mut stack: Vec<usize> = seed.into_iter().collect();
        while let Some(s) = stack.pop() {
            if set.insert(s) {
                stack.extend(self.states[s].epsilon.iter().copied());
            }
        }
        set
    }

    pub fn step(&self, from: &BTreeSet<usize>, token: Token) -> BTreeSet<usize> {
        let targets = from.iter().flat_map(|&s| {
            self.states[s]
                .transitions
                .iter()
                .filter(move |(t, _)| *t == token)
                .map(|(_, to)| *to)
        });
        self.epsilon_closure(targets)
    }

    /// Direct simulation, used as a reference for the DFA pipeline.
    pub fn accepts(&self, tokens: &[Token]) -> bool {
        let mut current = self.epsilon_closure([self.start]);
        for &t in tokens {
            current = self.step(&current, t);
            if current.is_empty() {
                return false;
            }
        }
        current.contains(&self.accept)
    }
}

/// Thompson construction.
pub fn compile(ast: &Regex) -> Nfa {
    let mut nfa = Nfa {
        states: Vec::new(),
        start: 0,
        accept: 0,
    };
    let (s, a) = build(ast, &mut nfa);
    nfa.start = s;
    nfa.accept = a;
    nfa
}

fn build(ast: &Regex, nfa: &mut Nfa) -> (usize, usize) {
    match ast {
        Regex::Token(t) => {
            let s = nfa.add_state();
            let a = nfa.add_state();
            nfa.states[s].transitions.push((*t, a));
            (s, a)
        }
        Regex::Concat(parts) => {
            let mut iter = parts.iter();
            let Some(first) = iter.next() else {
                let s = nfa.add_state();
                return (s, s);
            };
            let (start, mut end) = build(first, nfa);
            for p in iter {
                let (s, a) = build(p, nfa);
                nfa.states[end].epsilon.push(s);
                end = a;
            }
            (start, end)
        }
        Regex::Alt(parts) => {
            let s = nfa.add_state();
            let a = nfa.add_state();
            for p in parts {
                let (ps, pa) = build(p, nfa);
                nfa.states[s].epsilon.push(ps);
                nfa.states[pa].epsilon.push(a);
            }
            (s, a)
        }
        Regex::Plus(inner) | Regex::Star(inner) => {
            let s = nfa.add_state();
            let a = nfa.add_state();
            let (is, ia) = build(inner, nfa);
            nfa.states[s].epsilon.push(is);
            nfa.states[ia].epsilon.push(is);
            nfa.states[ia].epsilon.push(a);
            if matches!(ast, Regex::Star(_)) {
                nfa.states[s].epsilon.push(a);
            }
            (s, a)
        }
    }
}

/// Deterministic automaton, total over the token alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub transitions: Vec<[usize; Token::COUNT]>,
    pub start: usize,
    pub accepting: Vec<bool>,
}

impl Dfa {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn next(&self, state: usize, token: Token) -> usize {
        self.transitions[state][token.index()]
    }

    pub fn run(&self, tokens: &[Token]) -> usize {
        tokens.iter().fold(self.start, |s, t| self.next(s, *t))
    }

    pub fn accepts(&self, tokens: &[Token]) -> bool {
        self.accepting[self.run(tokens)]
    }

    /// Non-accepting states that loop to themselves on every token.
    pub fn traps(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&s| !self.accepting[s] && self.transitions[s].iter().all(|&t| t == s))
            .collect()
    }

    /// Text form: header lines, then one `from token to` line per transition.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let accept: Vec<String> = (0..self.len())
            .filter(|&s| self.accepting[s])
            .map(|s| s.to_string())
            .collect();
        let traps: Vec<String> = self.traps().iter().map(|s| s.to_string()).collect();
        writeln!(out, "states {}", self.len()).unwrap();
        writeln!(out, "start {}", self.start).unwrap();
        writeln!(out, "accept {}", accept.join(" ")).unwrap();
        writeln!(out, "trap {}", traps.join(" ")).unwrap();
        for (s, row) in self.transitions.iter().enumerate() {
            for t in Token::ALL {
                writeln!(out, "{s} {} {}", t.label(), row[t.index()]).unwrap();
            }
        }
        out
    }
}

/// Subset construction. The empty subset becomes the explicit trap state.
pub fn determinize(nfa: &Nfa) -> Dfa {
    let start = nfa.epsilon_closure([nfa.start]);
    let mut ids: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut subsets = vec![start.clone()];
    ids.insert(start, 0);
    let mut transitions = Vec::new();
    let mut i = 0;
    while i < subsets.len() {
        let mut row = [0usize; Token::COUNT];
        for t in Token::ALL {
            let next = nfa.step(&subsets[i], t);
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    subsets.push(next.clone());
                    ids.insert(next, subsets.len() - 1);
                    subsets.len() - 1
                }
            };
            row[t.index()] = id;
        }
        transitions.push(row);
        i += 1;
    }
    let accepting = subsets.iter().map(|s| s.contains(&nfa.accept)).collect();
    Dfa {
        transitions,
        start: 0,
        accepting,
    }
}

/// Hopcroft partition refinement over the reachable part of `dfa`.
/// States of the result are numbered in breadth-first order from the start.
pub fn minimize(dfa: &Dfa) -> Dfa {
    let reachable = reachable(dfa);
    let n = dfa.len();

    // Inverse transitions restricted to reachable states.
    let mut inverse = vec![vec![Vec::new(); n]; Token::COUNT];
    for &s in &reachable {
        for t in Token::ALL {
            inverse[t.index()][dfa.next(s, t)].push(s);
        }
    }

    let (acc, rej): (Vec<usize>, Vec<usize>) = reachable.iter().partition(|&&s| dfa.accepting[s]);
    let mut blocks: Vec<Vec<usize>> = [acc, rej].into_iter().filter(|b| !b.is_empty()).collect();
    let mut block_of = vec![usize::MAX; n];
    for (b, members) in blocks.iter().enumerate() {
        for &s in members {
            block_of[s] = b;
        }
    }
    let mut work: VecDeque<usize> = VecDeque::new();
    let mut in_work = vec![false; blocks.len()];
    if blocks.len() == 2 {
        let smaller = if blocks[0].len() <= blocks[1].len() {
            0
        } else {
            1
        };
        work.push_back(smaller);
        in_work[smaller] = true;
    }

    while let Some(splitter) = work.pop_front() {
        in_work[splitter] = false;
        let a: Vec<usize> = blocks[splitter].clone();
        for t in Token::ALL {
            let mut x: BTreeSet<usize> = BTreeSet::new();
            for &s in &a {
                x.extend(inverse[t.index()][s].iter().copied());
            }
            let touched: BTreeSet<usize> = x.iter().map(|&s| block_of[s]).collect();
            for y in touched {
                let (inside, outside): (Vec<usize>, Vec<usize>) =
                    blocks[y].iter().partition(|s| x.contains(s));
                if inside.is_empty() || outside.is_empty() {
                    continue;
                }
                let new_id = blocks.len();
                blocks[y] = inside;
                blocks.push(outside);
                in_work.push(false);
                for &s in &blocks[new_id] {
                    block_of[s] = new_id;
                }
                if in_work[y] {
                    work.push_back(new_id);
                    in_work[new_id] = true;
                } else {
                    let smaller = if blocks[y].len() <= blocks[new_id].len() {
                        y
                    } else {
                        new_id
                    };
                    work.push_back(smaller);
                    in_work[smaller] = true;
                }
            }
        }
    }

    // Renumber blocks breadth-first from the start block.
    let mut order = vec![usize::MAX; blocks.len()];
    let mut queue = VecDeque::from([block_of[dfa.start]]);
    order[block_of[dfa.start]] = 0;
    let mut count = 1;
    let mut transitions = Vec::new();
    let mut accepting = Vec::new();
    while let Some(b) = queue.pop_front() {
        let rep = blocks[b][0];
        let mut row = [0usize; Token::COUNT];
        for t in Token::ALL {
            let target = block_of[dfa.next(rep, t)];
            if order[target] == usize::MAX {
                order[target] = count;
                count += 1;
                queue.push_back(target);
            }
            row[t.index()] = order[target];
        }
        transitions.push(row);
        accepting.push(dfa.accepting[rep]);
    }
    Dfa {
        transitions,
        start: 0,
        accepting,
    }
}

fn reachable(dfa: &Dfa) -> Vec<usize> {
    let mut seen = vec![false; dfa.len()];
    let mut stack = vec![dfa.start];
    seen[dfa.start] = true;
    while let Some(s) = stack.pop() {
        for &t in &dfa.transitions[s] {
            if !seen[t] {
                seen[t] = true;
                stack.push(t);
            }
        }
    }
    (0..dfa.len()).filter(|&s| seen[s]).collect()
}

/// Shortest suffix telling two states apart, by breadth-first search over pairs.
pub fn distinguishing_suffix(dfa: &Dfa, a: usize, b: usize) -> Option<Vec<Token>> {
    let mut seen = BTreeSet::from([(a, b)]);
    let mut queue = VecDeque::from([(a, b, Vec::new())]);
    while let Some((p, q, word)) = queue.pop_front() {
        if dfa.accepting[p] != dfa.accepting[q] {
            return Some(word);
        }
        for t in Token::ALL {
            let next = (dfa.next(p, t), dfa.next(q, t));
            if seen.insert(next) {
                let mut w = word.clone();
                w.push(t);
                queue.push_back((next.0, next.1, w));
            }
        }
    }
    None
}
