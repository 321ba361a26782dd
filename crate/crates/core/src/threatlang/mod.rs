//! The threat language: per-cycle verdict tokens, the regular expression
//! `(E;)+` with `E = N | S | W | S·W`, its minimal acceptor, and behavior
//! traces built from verdicts.

pub mod automata;

pub use automata::{compile, determinize, distinguishing_suffix, minimize, Dfa, Nfa};

use crate::context::{Difficulty, Situational, TouristId, WeatherLevel};
use crate::geo::LatLon;
use crate::reasoning::ThreatVerdict;
use chrono::NaiveDateTime;
use std::fmt;
use std::sync::OnceLock;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Token {
    N,
    E6a,
    E6g,
    E6m,
    E6r,
    E2,
    E3,
    E4,
    E5,
    Sep,
}

impl Token {
    pub const COUNT: usize = 10;
    pub const ALL: [Token; Token::COUNT] = [
        Token::N,
        Token::E6a,
        Token::E6g,
        Token::E6m,
        Token::E6r,
        Token::E2,
        Token::E3,
        Token::E4,
        Token::E5,
        Token::Sep,
    ];
    pub const SITUATIONAL: [Token; 4] = [Token::E6a, Token::E6g, Token::E6m, Token::E6r];
    pub const WEATHER: [Token; 4] = [Token::E2, Token::E3, Token::E4, Token::E5];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Token::N => "N",
            Token::E6a => "E6a",
            Token::E6g => "E6g",
            Token::E6m => "E6m",
            Token::E6r => "E6r",
            Token::E2 => "E2",
            Token::E3 => "E3",
            Token::E4 => "E4",
            Token::E5 => "E5",
            Token::Sep => ";",
        }
    }

    pub fn situational(s: Situational) -> Token {
        match s {
            Situational::E6a => Token::E6a,
            Situational::E6g => Token::E6g,
            Situational::E6m => Token::E6m,
            Situational::E6r => Token::E6r,
        }
    }

    /// `None` for E1, which has no token of its own.
    pub fn weather(w: WeatherLevel) -> Option<Token> {
        match w {
            WeatherLevel::E1 => None,
            WeatherLevel::E2 => Some(Token::E2),
            WeatherLevel::E3 => Some(Token::E3),
            WeatherLevel::E4 => Some(Token::E4),
            WeatherLevel::E5 => Some(Token::E5),
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unrecognized input at byte {pos}: {rest:?}")]
pub struct TokenizeError {
    pub pos: usize,
    pub rest: String,
}

/// Splits text such as `"N; E6mE3;"` into tokens; whitespace is ignored.
pub fn tokenize(text: &str) -> Result<Vec<Token>, TokenizeError> {
    let mut out = Vec::new();
    let mut i = 0;
    let bytes = text.as_bytes();
    'outer: while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // Longest labels first so "E6a" is not read as "E6".
        let mut by_len = Token::ALL;
        by_len.sort_by_key(|t| std::cmp::Reverse(t.label().len()));
        for t in by_len {
            if text[i..].starts_with(t.label()) {
                out.push(t);
                i += t.label().len();
                continue 'outer;
            }
        }
        return Err(TokenizeError {
            pos: i,
            rest: text[i..].chars().take(8).collect(),
        });
    }
    Ok(out)
}

pub fn render(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.label()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum Regex {
    Token(Token),
    Concat(Vec<Regex>),
    Alt(Vec<Regex>),
    Plus(Box<Regex>),
    Star(Box<Regex>),
}

impl Regex {
    pub fn alt_of(tokens: &[Token]) -> Regex {
        Regex::Alt(tokens.iter().map(|t| Regex::Token(*t)).collect())
    }
}

/// `(E;)+` where `E = N | S | W | S W`.
pub fn threat_language() -> Regex {
    let s = Regex::alt_of(&Token::SITUATIONAL);
    let w = Regex::alt_of(&Token::WEATHER);
    let e = Regex::Alt(vec![
        Regex::Token(Token::N),
        s.clone(),
        w.clone(),
        Regex::Concat(vec![s, w]),
    ]);
    Regex::Plus(Box::new(Regex::Concat(vec![e, Regex::Token(Token::Sep)])))
}

/// The minimal acceptor of the threat language, built once.
pub fn threat_acceptor() -> &'static Dfa {
    static DFA: OnceLock<Dfa> = OnceLock::new();
    DFA.get_or_init(|| minimize(&determinize(&compile(&threat_language()))))
}

/// Tokens of one assessment: the highest-priority situational threat, then
/// the weather level; `N` when there is neither.
pub fn verdict_tokens(v: &ThreatVerdict) -> Vec<Token> {
    let mut out = Vec::with_capacity(2);
    if let Some(s) = v.situational.primary() {
        out.push(Token::situational(s));
    }
    if let Some(w) = Token::weather(v.weather) {
        out.push(w);
    }
    if out.is_empty() {
        out.push(Token::N);
    }
    out
}

/// One extended threat assessment point ⟨id, th, geo, ts, h, d⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorPoint {
    pub tourist: TouristId,
    pub th: Vec<Token>,
    pub geo: LatLon,
    pub ts: NaiveDateTime,
    pub trail: String,
    pub difficulty: Difficulty,
}

impl BehaviorPoint {
    pub fn th_string(&self) -> String {
        render(&self.th)
    }

    /// Tab-separated export line in tuple order.
    pub fn to_tsv(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:?}",
            self.tourist,
            self.th_string(),
            self.geo.to_dms(),
            self.ts.format("%d.%m.%Y,%H.%M.%S"),
            self.trail,
            self.difficulty
        )
    }
}

impl fmt::Display for BehaviorPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "⟨{}, {}, ({}), ({}), {}, {:?}⟩",
            self.tourist,
            self.th_string(),
            self.geo.to_dms(),
            self.ts.format("%d.%m.%Y,%H.%M"),
            self.trail,
            self.difficulty
        )
    }
}

/// Per-cycle context a behavior point copies from the tourist's row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointContext {
    pub geo: LatLon,
    pub ts: NaiveDateTime,
    pub trail: String,
    pub difficulty: Difficulty,
}

/// One point per verdict whose cycle has context; cycles without context are
/// gaps and are left out.
pub fn build_behavior_trace(
    verdicts: &[ThreatVerdict],
    context: impl Fn(&ThreatVerdict) -> Option<PointContext>,
) -> Vec<BehaviorPoint> {
    verdicts
        .iter()
        .filter_map(|v| {
            let c = context(v)?;
            Some(BehaviorPoint {
                tourist: v.tourist,
                th: verdict_tokens(v),
                geo: c.geo,
                ts: c.ts,
                trail: c.trail,
                difficulty: c.difficulty,
            })
        })
        .collect()
}

/// A trace as one sentence: every point's tokens followed by `;`.
pub fn trace_tokens<'a>(points: impl IntoIterator<Item = &'a [Token]>) -> Vec<Token> {
    let mut out = Vec::new();
    for th in points {
        out.extend_from_slice(th);
        out.push(Token::Sep);
    }
    out
}

/// Checks a sentence against the threat language.
pub fn accepts(tokens: &[Token]) -> bool {
    threat_acceptor().accepts(tokens)
}
