//! Periodic memory dumps and the statistics computed over them and over run
//! journals.

mod report;
mod svg;

pub use report::{
    dumps_csv, general_overview_csv, groups_csv, proximity_csv, season_averages, sharing_csv,
    solver_csv, threat_report_csv, transitions_csv, ProximityReport, ThreatReport,
};
pub use svg::{render_svg, MapAnimal};

use crate::context::TouristId;
use crate::reasoning::pipeline::{GroupCounts, PopulationCounts, StayRecord};
use crate::reasoning::{Pipeline, PipelineCounters, SolverStats};
use crate::repository::ContextRow;
use crate::world::Timestamp;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("at least two samples are needed, got {0}")]
    TooShort(usize),
    #[error("correlation is undefined for a zero-variance series")]
    ZeroVariance,
    #[error("malformed journal line {line}: {reason}")]
    Journal { line: usize, reason: String },
}

/// Sharing bands in percent.
pub const SHARING_BANDS: [u32; 5] = [0, 25, 50, 75, 100];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SharingConfig {
    /// Pairs sampled per histogram; all pairs are used when there are fewer.
    pub pairs: usize,
    pub seed: u64,
}

impl Default for SharingConfig {
    fn default() -> Self {
        Self {
            pairs: 2000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SharingHistogram {
    /// Pair counts per band of [`SHARING_BANDS`].
    pub bands: [u64; 5],
    pub pairs: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TransitionStats {
    pub tourists: u64,
    pub average: f64,
    pub min: u32,
    pub max: u32,
    pub stddev: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverSummary {
    pub calls: u64,
    pub starts: u64,
    pub mean_ms: f64,
    pub stddev_ms: f64,
}

impl From<&SolverStats> for SolverSummary {
    fn from(s: &SolverStats) -> Self {
        Self {
            calls: s.calls,
            starts: s.starts,
            mean_ms: s.mean_ms(),
            stddev_ms: s.stddev_ms(),
        }
    }
}

/// Full counter and context snapshot at one instant of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dump {
    pub index: usize,
    pub timestamp: Timestamp,
    pub clock: String,
    pub population: PopulationCounts,
    pub counters: PipelineCounters,
    pub groups: GroupCounts,
    pub transitions: TransitionStats,
    pub sharing: SharingHistogram,
    pub solver: SolverSummary,
}

/// Reads the pipeline without changing it.
pub fn take_dump(pipeline: &Pipeline, index: usize, t: Timestamp, sharing: SharingConfig) -> Dump {
    let snapshot = pipeline.snapshot();
    let rows: Vec<&ContextRow> = snapshot.rows.values().collect();
    let seed = sharing.seed ^ (index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    Dump {
        index,
        timestamp: t,
        clock: pipeline
            .area()
            .schedule
            .datetime(t)
            .format("%H:%M")
            .to_string(),
        population: pipeline.population(),
        counters: pipeline.counters().clone(),
        groups: pipeline.group_counts(),
        transitions: context_transition_stats(pipeline.stays()),
        sharing: context_sharing_histogram(&rows, SharingConfig { seed, ..sharing }),
        solver: pipeline.solver_stats().into(),
    }
}

/// Statistics over finished stays.
pub fn context_transition_stats(stays: &[StayRecord]) -> TransitionStats {
    if stays.is_empty() {
        return TransitionStats::default();
    }
    let n = stays.len() as f64;
    let values = stays.iter().map(|s| s.transitions as f64);
    let average = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - average).powi(2)).sum::<f64>() / n;
    TransitionStats {
        tourists: stays.len() as u64,
        average,
        min: stays.iter().map(|s| s.transitions).min().unwrap_or(0),
        max: stays.iter().map(|s| s.transitions).max().unwrap_or(0),
        stddev: var.sqrt(),
    }
}

/// Number of equal fields between two rows, out of [`SHARED_FIELDS`].
pub fn shared_fields(a: &ContextRow, b: &ContextRow) -> u32 {
    [
        a.tags.wind == b.tags.wind,
        a.tags.fog == b.tags.fog,
        a.tags.temperature == b.tags.temperature,
        a.tags.rain == b.tags.rain,
        a.difficulty == b.difficulty,
        a.day_night == b.day_night,
        a.trail == b.trail,
    ]
    .into_iter()
    .filter(|x| *x)
    .count() as u32
}

pub const SHARED_FIELDS: u32 = 7;

/// Index into [`SHARING_BANDS`] of the band nearest to `equal / SHARED_FIELDS`.
pub fn sharing_band(equal: u32) -> usize {
    (4.0 * equal as f64 / SHARED_FIELDS as f64).round() as usize
}

pub fn context_sharing_histogram(rows: &[&ContextRow], cfg: SharingConfig) -> SharingHistogram {
    let mut h = SharingHistogram::default();
    let n = rows.len();
    if n < 2 {
        return h;
    }
    let mut add = |i: usize, j: usize| {
        h.bands[sharing_band(shared_fields(rows[i], rows[j]))] += 1;
        h.pairs += 1;
    };
    if n * (n - 1) / 2 <= cfg.pairs {
        for i in 0..n {
            for j in i + 1..n {
                add(i, j);
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for _ in 0..cfg.pairs {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            add(i, j);
        }
    }
    h
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, AnalyticsError> {
    if xs.len() != ys.len() {
        return Err(AnalyticsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(AnalyticsError::TooShort(xs.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalyticsError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Departed tourists that never produced a cycle.
pub fn stays_without_cycles(stays: &[StayRecord]) -> Vec<TouristId> {
    stays
        .iter()
        .filter(|s| s.cycles == 0)
        .map(|s| s.tourist)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_rounding() {
        let bands: Vec<usize> = (0..=7).map(sharing_band).collect();
        assert_eq!(bands, vec![0, 1, 1, 2, 2, 3, 3, 4]);
    }

    #[test]
    fn pearson_basics() {
        let xs = [1.0, 2.0, 3.0, 5.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        assert!((pearson(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&xs, &[1.0; 4]), Err(AnalyticsError::ZeroVariance));
        assert_eq!(pearson(&[1.0], &[1.0]), Err(AnalyticsError::TooShort(1)));
        assert_eq!(
            pearson(&xs, &[1.0]),
            Err(AnalyticsError::LengthMismatch(4, 1))
        );
    }

    #[test]
    fn transition_stats_basics() {
        let stay = |t| StayRecord {
            tourist: TouristId(0),
            cycles: 10,
            transitions: t,
        };
        assert_eq!(context_transition_stats(&[]), TransitionStats::default());
        let s = context_transition_stats(&[stay(0), stay(2), stay(4)]);
        assert_eq!((s.tourists, s.min, s.max), (3, 0, 4));
        assert!((s.average - 2.0).abs() < 1e-12);
        assert!((s.stddev - (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }
}
