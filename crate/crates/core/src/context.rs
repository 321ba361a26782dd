//! Vocabulary shared across the pipeline: tags, levels and identifiers.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown {kind} label `{label}`")]
pub struct LabelError {
    pub kind: &'static str,
    pub label: String,
}

fn label_err(kind: &'static str, label: &str) -> LabelError {
    LabelError {
        kind,
        label: label.to_string(),
    }
}

/// Identifier of a tourist (and of the phone they carry).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TouristId(pub u32);

impl fmt::Display for TouristId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}", self.0)
    }
}

impl FromStr for TouristId {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('T')
            .and_then(|n| n.parse().ok())
            .map(TouristId)
            .ok_or_else(|| label_err("tourist", s))
    }
}

/// Trail difficulty assigned by rescuers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    D1,
    D2,
    D3,
    D4,
}

impl Difficulty {
    pub const ALL: [Difficulty; 4] = [Self::D1, Self::D2, Self::D3, Self::D4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        ["D1", "D2", "D3", "D4"][self.index()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Season {
    Summer,
    Winter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DayNight {
    Day,
    Night,
}

/// Three-step severity of one weather factor (W, F, T or R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TagLevel {
    L1,
    L2,
    L3,
}

impl TagLevel {
    pub const ALL: [TagLevel; 3] = [Self::L1, Self::L2, Self::L3];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// The four weather factors that get tagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeatherFactor {
    Wind,
    Fog,
    Temperature,
    Rain,
}

impl WeatherFactor {
    pub const ALL: [WeatherFactor; 4] = [Self::Wind, Self::Fog, Self::Temperature, Self::Rain];

    pub fn letter(self) -> char {
        match self {
            Self::Wind => 'W',
            Self::Fog => 'F',
            Self::Temperature => 'T',
            Self::Rain => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WeatherTags {
    pub wind: TagLevel,
    pub fog: TagLevel,
    pub temperature: TagLevel,
    pub rain: TagLevel,
}

impl Default for WeatherTags {
    fn default() -> Self {
        Self {
            wind: TagLevel::L1,
            fog: TagLevel::L1,
            temperature: TagLevel::L1,
            rain: TagLevel::L1,
        }
    }
}

impl WeatherTags {
    pub fn get(&self, factor: WeatherFactor) -> TagLevel {
        match factor {
            WeatherFactor::Wind => self.wind,
            WeatherFactor::Fog => self.fog,
            WeatherFactor::Temperature => self.temperature,
            WeatherFactor::Rain => self.rain,
        }
    }

    pub fn set(&mut self, factor: WeatherFactor, level: TagLevel) {
        match factor {
            WeatherFactor::Wind => self.wind = level,
            WeatherFactor::Fog => self.fog = level,
            WeatherFactor::Temperature => self.temperature = level,
            WeatherFactor::Rain => self.rain = level,
        }
    }

    /// Sum of steps above level 1, in `0..=8`.
    pub fn severity(&self) -> u8 {
        WeatherFactor::ALL
            .iter()
            .map(|f| self.get(*f).index() as u8)
            .sum()
    }
}

impl fmt::Display for WeatherTags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "W{}F{}T{}R{}",
            self.wind.number(),
            self.fog.number(),
            self.temperature.number(),
            self.rain.number()
        )
    }
}

/// Avalanche danger, set manually by rescuers (A1 lowest .. A5 highest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct AvalancheLevel(u8);

impl AvalancheLevel {
    pub const LOWEST: AvalancheLevel = AvalancheLevel(1);

    pub fn new(level: u8) -> Option<Self> {
        (1..=5).contains(&level).then_some(Self(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<u8> for AvalancheLevel {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Self::new(v).ok_or_else(|| format!("avalanche level {v} outside 1..=5"))
    }
}

impl From<AvalancheLevel> for u8 {
    fn from(a: AvalancheLevel) -> u8 {
        a.0
    }
}

impl fmt::Display for AvalancheLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A{}", self.0)
    }
}

/// Weather threat level. `E1` means no threat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WeatherLevel {
    E1,
    E2,
    E3,
    E4,
    E5,
}

impl WeatherLevel {
    pub const ALL: [WeatherLevel; 5] = [Self::E1, Self::E2, Self::E3, Self::E4, Self::E5];
    /// Levels checked by the reasoning cascade, most severe first.
    pub const CASCADE: [WeatherLevel; 4] = [Self::E5, Self::E4, Self::E3, Self::E2];

    pub fn label(self) -> &'static str {
        match self {
            Self::E1 => "E1",
            Self::E2 => "E2",
            Self::E3 => "E3",
            Self::E4 => "E4",
            Self::E5 => "E5",
        }
    }

    pub fn is_threat(self) -> bool {
        self != Self::E1
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn color(self) -> &'static str {
        match self {
            Self::E1 => "green",
            Self::E2 => "yellow",
            Self::E3 => "orange",
            Self::E4 => "red",
            Self::E5 => "black",
        }
    }
}

impl fmt::Display for WeatherLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for WeatherLevel {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.label() == s)
            .ok_or_else(|| label_err("weather level", s))
    }
}

/// Non-weather (situational) threats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Situational {
    /// Too far from the group leader.
    E6g,
    /// Too close to a dangerous animal.
    E6a,
    /// Prolonged time without motion.
    E6m,
    /// Off-trail hiking.
    E6r,
}

impl Situational {
    pub const ALL: [Situational; 4] = [Self::E6g, Self::E6a, Self::E6m, Self::E6r];
    /// Order used when a single situational token must represent a set.
    pub const PRIORITY: [Situational; 4] = [Self::E6m, Self::E6r, Self::E6a, Self::E6g];

    pub fn label(self) -> &'static str {
        match self {
            Self::E6g => "E6g",
            Self::E6a => "E6a",
            Self::E6m => "E6m",
            Self::E6r => "E6r",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn shape(self) -> &'static str {
        match self {
            Self::E6g => "pentagon",
            Self::E6r => "circle",
            Self::E6m => "square",
            Self::E6a => "triangle",
        }
    }
}

impl fmt::Display for Situational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Situational {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.label() == s)
            .ok_or_else(|| label_err("situational threat", s))
    }
}

/// Small set of situational threats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct SituationalSet(u8);

impl SituationalSet {
    pub fn empty() -> Self {
        Self(0)
    }

    pub fn insert(&mut self, s: Situational) {
        self.0 |= s.bit();
    }

    pub fn contains(&self, s: Situational) -> bool {
        self.0 & s.bit() != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = Situational> + '_ {
        Situational::ALL.into_iter().filter(|s| self.contains(*s))
    }

    /// Highest-priority member (E6m > E6r > E6a > E6g).
    pub fn primary(&self) -> Option<Situational> {
        Situational::PRIORITY
            .into_iter()
            .find(|s| self.contains(*s))
    }
}

impl FromIterator<Situational> for SituationalSet {
    fn from_iter<I: IntoIterator<Item = Situational>>(iter: I) -> Self {
        let mut set = Self::empty();
        for s in iter {
            set.insert(s);
        }
        set
    }
}

impl fmt::Display for SituationalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let labels: Vec<_> = self.iter().map(Situational::label).collect();
        f.write_str(&labels.join(","))
    }
}

impl FromStr for SituationalSet {
    type Err = LabelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "-" {
            return Ok(Self::empty());
        }
        s.split(',').map(str::parse).collect()
    }
}
