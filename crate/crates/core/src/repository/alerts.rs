//! Propositional alert formulas and named alert sets.

use crate::context::{
    AvalancheLevel, DayNight, Difficulty, Season, TagLevel, WeatherFactor, WeatherLevel,
    WeatherTags,
};
use serde::Deserialize;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

const DEFAULT_ALERTS: &str = include_str!("../../assets/alerts.toml");

const ATOM_NAMES: [&str; Atom::COUNT] = [
    "W1", "W2", "W3", "F1", "F2", "F3", "T1", "T2", "T3", "R1", "R2", "R3", "A1", "A2", "A3", "A4",
    "A5", "D1", "D2", "D3", "D4", "Day", "Night", "Summer", "Winter",
];

/// Mutually exclusive atom groups; exactly one atom of each holds for a row.
pub const ATOM_GROUPS: [std::ops::Range<u8>; 8] =
    [0..3, 3..6, 6..9, 9..12, 12..17, 17..21, 21..23, 23..25];

/// A propositional variable describing one facet of a tourist's context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom(u8);

impl Atom {
    pub const COUNT: usize = 25;

    pub fn all() -> impl Iterator<Item = Atom> {
        (0..Self::COUNT as u8).map(Atom)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Option<Atom> {
        (i < Self::COUNT).then_some(Atom(i as u8))
    }

    pub fn name(self) -> &'static str {
        ATOM_NAMES[self.index()]
    }

    pub fn parse(name: &str) -> Option<Atom> {
        ATOM_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| Atom(i as u8))
    }

    pub fn tag(factor: WeatherFactor, level: TagLevel) -> Atom {
        let base = match factor {
            WeatherFactor::Wind => 0,
            WeatherFactor::Fog => 3,
            WeatherFactor::Temperature => 6,
            WeatherFactor::Rain => 9,
        };
        Atom(base + level.index() as u8)
    }

    pub fn avalanche(level: AvalancheLevel) -> Atom {
        Atom(12 + level.get() - 1)
    }

    pub fn difficulty(d: Difficulty) -> Atom {
        Atom(17 + d.index() as u8)
    }

    pub fn day_night(dn: DayNight) -> Atom {
        match dn {
            DayNight::Day => Atom(21),
            DayNight::Night => Atom(22),
        }
    }

    pub fn season(s: Season) -> Atom {
        match s {
            Season::Summer => Atom(23),
            Season::Winter => Atom(24),
        }
    }

    pub fn group(self) -> usize {
        ATOM_GROUPS
            .iter()
            .position(|g| g.contains(&self.0))
            .expect("every atom belongs to a group")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The full truth assignment a context row induces over all atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AtomValuation([bool; Atom::COUNT]);

impl AtomValuation {
    pub fn from_context(
        tags: &WeatherTags,
        avalanche: AvalancheLevel,
        difficulty: Difficulty,
        day_night: DayNight,
        season: Season,
    ) -> Self {
        let mut v = [false; Atom::COUNT];
        for f in WeatherFactor::ALL {
            v[Atom::tag(f, tags.get(f)).index()] = true;
        }
        v[Atom::avalanche(avalanche).index()] = true;
        v[Atom::difficulty(difficulty).index()] = true;
        v[Atom::day_night(day_night).index()] = true;
        v[Atom::season(season).index()] = true;
        Self(v)
    }

    pub fn get(&self, a: Atom) -> bool {
        self.0[a.index()]
    }

    pub fn true_atoms(&self) -> impl Iterator<Item = Atom> + '_ {
        Atom::all().filter(|a| self.get(*a))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Const(bool),
    Atom(Atom),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
}

impl Formula {
    pub fn eval(&self, truth: &dyn Fn(Atom) -> bool) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Atom(a) => truth(*a),
            Formula::Not(f) => !f.eval(truth),
            Formula::And(fs) => fs.iter().all(|f| f.eval(truth)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(truth)),
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Atom>) {
        match self {
            Formula::Const(_) => {}
            Formula::Atom(a) => out.push(*a),
            Formula::Not(f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
        }
    }

    /// Parses with atoms only; no named definitions.
    pub fn parse(text: &str) -> Result<Formula, FormulaError> {
        Parser::new(text, &|_| None)?.parse_all()
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, fs: &[Formula], op: &str| {
            f.write_str("(")?;
            for (i, x) in fs.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{x}")?;
            }
            f.write_str(")")
        };
        match self {
            Formula::Const(true) => f.write_str("TRUE"),
            Formula::Const(false) => f.write_str("FALSE"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => write!(f, "NOT {x}"),
            Formula::And(fs) => join(f, fs, "AND"),
            Formula::Or(fs) => join(f, fs, "OR"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulaError {
    #[error("unknown atom or definition `{0}`")]
    UnknownAtom(String),
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("definition `{0}` refers to itself")]
    Cycle(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
    resolve: &'a dyn Fn(&str) -> Option<Result<Formula, FormulaError>>,
}

impl<'a> Parser<'a> {
    fn new(
        text: &str,
        resolve: &'a dyn Fn(&str) -> Option<Result<Formula, FormulaError>>,
    ) -> Result<Self, FormulaError> {
        let mut toks = Vec::new();
        let mut chars = text.char_indices().peekable();
        while let Some(&(i, c)) = chars.peek() {
            if c.is_whitespace() {
                chars.next();
            } else if c == '(' {
                toks.push((i, Tok::LParen));
                chars.next();
            } else if c == ')' {
                toks.push((i, Tok::RParen));
                chars.next();
            } else if c.is_ascii_alphanumeric() || c == '_' {
                let mut s = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        s.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                toks.push((i, Tok::Ident(s)));
            } else {
                return Err(FormulaError::Syntax {
                    pos: i,
                    message: format!("unexpected character {c:?}"),
                });
            }
        }
        Ok(Self {
            toks,
            pos: 0,
            end: text.len(),
            resolve,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: &str) -> Result<T, FormulaError> {
        Err(FormulaError::Syntax {
            pos: self.here(),
            message: message.to_string(),
        })
    }

    fn keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn parse_all(mut self) -> Result<Formula, FormulaError> {
        let f = self.parse_or()?;
        if self.pos != self.toks.len() {
            return self.error("trailing input");
        }
        Ok(f)
    }

    fn parse_or(&mut self) -> Result<Formula, FormulaError> {
        let mut parts = vec![self.parse_and()?];
        while self.keyword("OR") {
            self.pos += 1;
            parts.push(self.parse_and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn parse_and(&mut self) -> Result<Formula, FormulaError> {
        let mut parts = vec![self.parse_unary()?];
        while self.keyword("AND") {
            self.pos += 1;
            parts.push(self.parse_unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn parse_unary(&mut self) -> Result<Formula, FormulaError> {
        match self.peek().cloned() {
            Some(Tok::Ident(s)) if s == "NOT" => {
                self.pos += 1;
                Ok(Formula::Not(Box::new(self.parse_unary()?)))
            }
            Some(Tok::Ident(s)) if s == "AND" || s == "OR" => {
                self.error("operator without operand")
            }
            Some(Tok::Ident(s)) => {
                self.pos += 1;
                match s.as_str() {
                    "TRUE" => Ok(Formula::Const(true)),
                    "FALSE" => Ok(Formula::Const(false)),
                    _ => match Atom::parse(&s) {
                        Some(a) => Ok(Formula::Atom(a)),
                        None => (self.resolve)(&s).unwrap_or(Err(FormulaError::UnknownAtom(s))),
                    },
                }
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.parse_or()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.error("expected `)`");
                }
                self.pos += 1;
                Ok(f)
            }
            Some(Tok::RParen) => self.error("unexpected `)`"),
            None => self.error("unexpected end of formula"),
        }
    }
}

/// Parses `text`, expanding identifiers found in `defines` recursively.
pub fn parse_with_defines(
    text: &str,
    defines: &BTreeMap<String, String>,
) -> Result<Formula, FormulaError> {
    parse_rec(text, defines, &RefCell::new(Vec::new()))
}

fn parse_rec(
    text: &str,
    defines: &BTreeMap<String, String>,
    stack: &RefCell<Vec<String>>,
) -> Result<Formula, FormulaError> {
    let resolve = |name: &str| -> Option<Result<Formula, FormulaError>> {
        let body = defines.get(name)?;
        if stack.borrow().iter().any(|n| n == name) {
            return Some(Err(FormulaError::Cycle(name.to_string())));
        }
        stack.borrow_mut().push(name.to_string());
        let r = parse_rec(body, defines, stack);
        stack.borrow_mut().pop();
        Some(r)
    };
    Parser::new(text, &resolve)?.parse_all()
}

/// Which contexts an alert entry applies to; `None` is a wildcard.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AlertKey {
    pub level: WeatherLevel,
    pub difficulty: Option<Difficulty>,
    pub day_night: Option<DayNight>,
    pub season: Option<Season>,
}

impl AlertKey {
    fn matches(&self, level: WeatherLevel, d: Difficulty, dn: DayNight, s: Season) -> bool {
        self.level == level
            && self.difficulty.is_none_or(|x| x == d)
            && self.day_night.is_none_or(|x| x == dn)
            && self.season.is_none_or(|x| x == s)
    }

    /// More concrete fields win; among equals, difficulty outranks day/night,
    /// which outranks season.
    fn specificity(&self) -> (u8, bool, bool, bool) {
        let (d, n, s) = (
            self.difficulty.is_some(),
            self.day_night.is_some(),
            self.season.is_some(),
        );
        (d as u8 + n as u8 + s as u8, d, n, s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertEntry {
    pub key: AlertKey,
    pub source: String,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlertSet {
    pub name: String,
    pub entries: Vec<AlertEntry>,
}

#[derive(Debug, Error)]
pub enum AlertError {
    #[error("alert file parse error: {0}")]
    Parse(String),
    #[error("set `{set}` entry {index}: {source}")]
    Formula {
        set: String,
        index: usize,
        source: FormulaError,
    },
    #[error("set `{set}`: {message}")]
    Invalid { set: String, message: String },
    #[error("alert set `{0}` not found")]
    NotFound(String),
}

impl AlertSet {
    /// Index of the entry that governs `level` in the given context.
    pub fn entry_index(
        &self,
        level: WeatherLevel,
        d: Difficulty,
        dn: DayNight,
        s: Season,
    ) -> Option<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.key.matches(level, d, dn, s))
            .max_by_key(|(_, e)| e.key.specificity())
            .map(|(i, _)| i)
    }

    pub fn formula_for(
        &self,
        level: WeatherLevel,
        d: Difficulty,
        dn: DayNight,
        s: Season,
    ) -> Option<&Formula> {
        self.entry_index(level, d, dn, s)
            .map(|i| &self.entries[i].formula)
    }

    /// Checks duplicate keys and coverage of every context.
    pub fn validate(&self) -> Result<(), AlertError> {
        let invalid = |message: String| AlertError::Invalid {
            set: self.name.clone(),
            message,
        };
        for (i, e) in self.entries.iter().enumerate() {
            if e.key.level == WeatherLevel::E1 {
                return Err(invalid(format!(
                    "entry {i}: E1 is the fallback and takes no formula"
                )));
            }
            if self.entries[..i].iter().any(|o| o.key == e.key) {
                return Err(invalid(format!("entry {i}: duplicate key {:?}", e.key)));
            }
        }
        for level in WeatherLevel::CASCADE {
            for d in Difficulty::ALL {
                for dn in [DayNight::Day, DayNight::Night] {
                    for s in [Season::Summer, Season::Winter] {
                        if self.entry_index(level, d, dn, s).is_none() {
                            return Err(invalid(format!(
                                "no entry covers {level:?}/{d:?}/{dn:?}/{s:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlertFile {
    active: String,
    #[serde(default)]
    defines: BTreeMap<String, String>,
    set: Vec<RawAlertSet>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlertSet {
    name: String,
    entry: Vec<RawAlertEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAlertEntry {
    level: WeatherLevel,
    #[serde(default)]
    difficulty: Option<Difficulty>,
    #[serde(default)]
    day_night: Option<DayNight>,
    #[serde(default)]
    season: Option<Season>,
    formula: String,
}

/// Every set in an alert file plus the name of the one active at start.
#[derive(Debug, Clone)]
pub struct AlertLibrary {
    pub active: String,
    pub sets: BTreeMap<String, AlertSet>,
}

pub fn load_alert_sets(text: &str) -> Result<AlertLibrary, AlertError> {
    let raw: RawAlertFile = toml::from_str(text).map_err(|e| AlertError::Parse(e.to_string()))?;
    let mut sets = BTreeMap::new();
    for rs in raw.set {
        let mut entries = Vec::new();
        for (index, re) in rs.entry.into_iter().enumerate() {
            let formula = parse_with_defines(&re.formula, &raw.defines).map_err(|source| {
                AlertError::Formula {
                    set: rs.name.clone(),
                    index,
                    source,
                }
            })?;
            entries.push(AlertEntry {
                key: AlertKey {
                    level: re.level,
                    difficulty: re.difficulty,
                    day_night: re.day_night,
                    season: re.season,
                },
                source: re.formula,
                formula,
            });
        }
        let set = AlertSet {
            name: rs.name.clone(),
            entries,
        };
        set.validate()?;
        if sets.insert(rs.name.clone(), set).is_some() {
            return Err(AlertError::Invalid {
                set: rs.name,
                message: "duplicate set name".into(),
            });
        }
    }
    if !sets.contains_key(&raw.active) {
        return Err(AlertError::NotFound(raw.active));
    }
    Ok(AlertLibrary {
        active: raw.active,
        sets,
    })
}

pub fn default_alert_sets() -> AlertLibrary {
    load_alert_sets(DEFAULT_ALERTS).expect("embedded alert sets are valid")
}
