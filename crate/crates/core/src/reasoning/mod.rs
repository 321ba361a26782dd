//! Threat reasoning: non-weather detectors, the entailment cascade for
//! weather levels and the cycle driver.

pub mod encode;
pub mod pipeline;
pub mod sat;

pub use encode::{entails, CompiledFormula};
pub use pipeline::{Inlet, Pipeline, PipelineConfig, PipelineCounters};
pub use sat::{solve, Cnf, SatResult};

use crate::context::{Situational, SituationalSet, TouristId, WeatherLevel};
use crate::repository::{AlertSet, ContextRow};
use crate::world::{DetectorConfig, Timestamp};
use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThreatVerdict {
    pub tourist: TouristId,
    pub weather: WeatherLevel,
    pub situational: SituationalSet,
    pub cycle: u64,
    pub timestamp: Timestamp,
}

/// Situational threats derived from a single row.
pub fn a3_detect_nonweather(row: &ContextRow, cfg: &DetectorConfig) -> SituationalSet {
    let mut out = SituationalSet::empty();
    if row.leader_distance.is_some_and(|d| d > cfg.leader_distance) {
        out.insert(Situational::E6g);
    }
    if row
        .nearest_dangerous_animal
        .is_some_and(|d| d < cfg.animal_distance)
    {
        out.insert(Situational::E6a);
    }
    if row.motion_idle_seconds > cfg.idle_seconds && !row.in_special_place {
        out.insert(Situational::E6m);
    }
    if row.off_trail {
        out.insert(Situational::E6r);
    }
    out
}

/// Counts and wall-clock timings of solver invocations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverStats {
    /// Individual entailment checks.
    pub calls: u64,
    /// Cascades started, one per evaluated row.
    pub starts: u64,
    pub total_seconds: f64,
    pub total_sq_seconds: f64,
}

impl SolverStats {
    pub fn mean_ms(&self) -> f64 {
        if self.calls == 0 {
            0.0
        } else {
            1e3 * self.total_seconds / self.calls as f64
        }
    }

    pub fn stddev_ms(&self) -> f64 {
        if self.calls < 2 {
            return 0.0;
        }
        let n = self.calls as f64;
        let mean = self.total_seconds / n;
        let var = (self.total_sq_seconds / n - mean * mean).max(0.0);
        1e3 * var.sqrt()
    }

    fn record(&mut self, seconds: f64) {
        self.calls += 1;
        self.total_seconds += seconds;
        self.total_sq_seconds += seconds * seconds;
    }
}

/// Runs the E5→E2 cascade, caching compiled formulas per alert set.
#[derive(Debug, Default)]
pub struct Reasoner {
    compiled: BTreeMap<String, Vec<CompiledFormula>>,
    pub stats: SolverStats,
}

impl Reasoner {
    pub fn new() -> Self {
        Self::default()
    }

    /// First entailed level from E5 down to E2, else E1.
    pub fn weather_cascade(&mut self, row: &ContextRow, set: &AlertSet) -> WeatherLevel {
        let compiled = self.compiled.entry(set.name.clone()).or_insert_with(|| {
            set.entries
                .iter()
                .map(|e| CompiledFormula::new(&e.formula))
                .collect()
        });
        let valuation = row.valuation();
        self.stats.starts += 1;
        for level in WeatherLevel::CASCADE {
            let Some(i) = set.entry_index(level, row.difficulty, row.day_night, row.season) else {
                continue;
            };
            let started = Instant::now();
            let hit = entails(&compiled[i], &valuation);
            self.stats.record(started.elapsed().as_secs_f64());
            if hit {
                return level;
            }
        }
        WeatherLevel::E1
    }

    pub fn evaluate(
        &mut self,
        row: &ContextRow,
        set: &AlertSet,
        detectors: &DetectorConfig,
        cycle: u64,
        timestamp: Timestamp,
    ) -> ThreatVerdict {
        ThreatVerdict {
            tourist: row.tourist,
            weather: self.weather_cascade(row, set),
            situational: a3_detect_nonweather(row, detectors),
            cycle,
            timestamp,
        }
    }
}
