//! Context store: one row per tourist in the area, alert sets and the
//! manually set avalanche level.
//!
//! Rows live behind an `Arc` and are copied on write, so taking a snapshot is
//! a pointer clone and never blocks the writer.

pub mod alerts;

pub use alerts::{
    default_alert_sets, load_alert_sets, AlertError, AlertLibrary, AlertSet, Atom, AtomValuation,
    Formula, FormulaError,
};

use crate::context::{AvalancheLevel, DayNight, Difficulty, Season, TouristId, WeatherTags};
use crate::preprocess::GeoFix;
use crate::world::{GroupId, Timestamp, TrailId, WeatherStationId};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContextRow {
    pub tourist: TouristId,
    pub fix: GeoFix,
    pub trail: TrailId,
    pub arclength: f64,
    pub difficulty: Difficulty,
    pub tags: WeatherTags,
    pub station: WeatherStationId,
    pub day_night: DayNight,
    pub season: Season,
    pub avalanche: AvalancheLevel,
    pub motion_idle_seconds: u64,
    pub off_trail: bool,
    pub in_special_place: bool,
    pub group: Option<GroupId>,
    /// Distance to the group leader; `None` for leaders and lone tourists.
    pub leader_distance: Option<f64>,
    pub nearest_dangerous_animal: Option<f64>,
    pub updated_at: Timestamp,
}

impl ContextRow {
    pub fn valuation(&self) -> AtomValuation {
        AtomValuation::from_context(
            &self.tags,
            self.avalanche,
            self.difficulty,
            self.day_night,
            self.season,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvalancheSetting {
    pub level: AvalancheLevel,
    pub set_by: String,
    pub set_at: Timestamp,
}

#[derive(Debug, Error, PartialEq)]
pub enum RepoError {
    #[error("write for {0} after its departure")]
    StaleWrite(TouristId),
    #[error("row for {tourist} is invalid: {reason}")]
    InvalidRow { tourist: TouristId, reason: String },
    #[error("alert set `{0}` not found")]
    NotFound(String),
}

/// Point-in-time view handed to the reasoning layer.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub rows: Arc<BTreeMap<TouristId, ContextRow>>,
    pub alerts: Arc<AlertSet>,
    pub avalanche: AvalancheSetting,
}

impl Snapshot {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub struct Repository {
    trail_difficulty: Vec<Difficulty>,
    rows: Arc<BTreeMap<TouristId, ContextRow>>,
    departed: BTreeSet<TouristId>,
    sets: BTreeMap<String, Arc<AlertSet>>,
    active: Arc<AlertSet>,
    avalanche: AvalancheSetting,
}

impl Repository {
    /// `trail_difficulty[i]` is the difficulty of trail `i`.
    pub fn new(trail_difficulty: Vec<Difficulty>, library: AlertLibrary) -> Self {
        let sets: BTreeMap<_, _> = library
            .sets
            .into_iter()
            .map(|(k, v)| (k, Arc::new(v)))
            .collect();
        let active = Arc::clone(&sets[&library.active]);
        Self {
            trail_difficulty,
            rows: Arc::default(),
            departed: BTreeSet::new(),
            sets,
            active,
            avalanche: AvalancheSetting {
                level: AvalancheLevel::LOWEST,
                set_by: "system".into(),
                set_at: 0,
            },
        }
    }

    /// Stores `row`, returning the row it replaced.
    pub fn upsert_row(&mut self, row: ContextRow) -> Result<Option<ContextRow>, RepoError> {
        if self.departed.contains(&row.tourist) {
            return Err(RepoError::StaleWrite(row.tourist));
        }
        let invalid = |reason: String| RepoError::InvalidRow {
            tourist: row.tourist,
            reason,
        };
        match self.trail_difficulty.get(row.trail.0 as usize) {
            None => return Err(invalid(format!("unknown trail {:?}", row.trail))),
            Some(d) if *d != row.difficulty => {
                return Err(invalid(format!(
                    "difficulty {:?} differs from trail's {d:?}",
                    row.difficulty
                )))
            }
            _ => {}
        }
        if let Some(prev) = self.rows.get(&row.tourist) {
            if row.updated_at < prev.updated_at {
                return Err(invalid("updated_at went backwards".into()));
            }
        }
        Ok(Arc::make_mut(&mut self.rows).insert(row.tourist, row))
    }

    pub fn row(&self, id: TouristId) -> Option<&ContextRow> {
        self.rows.get(&id)
    }

    /// Removes the tourist's row; later writes for it are stale.
    pub fn depart(&mut self, id: TouristId) -> Option<ContextRow> {
        self.departed.insert(id);
        if self.rows.contains_key(&id) {
            Arc::make_mut(&mut self.rows).remove(&id)
        } else {
            None
        }
    }

    pub fn is_departed(&self, id: TouristId) -> bool {
        self.departed.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            rows: Arc::clone(&self.rows),
            alerts: Arc::clone(&self.active),
            avalanche: self.avalanche.clone(),
        }
    }

    pub fn active_alert_set(&self) -> &str {
        &self.active.name
    }

    pub fn alert_set_names(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    /// Makes `name` the active set for subsequent snapshots; returns the old name.
    pub fn swap_alert_set(&mut self, name: &str) -> Result<String, RepoError> {
        let next = self
            .sets
            .get(name)
            .ok_or_else(|| RepoError::NotFound(name.to_string()))?;
        let previous = self.active.name.clone();
        self.active = Arc::clone(next);
        Ok(previous)
    }

    pub fn avalanche(&self) -> &AvalancheSetting {
        &self.avalanche
    }

    pub fn set_avalanche(&mut self, level: AvalancheLevel, operator: &str, at: Timestamp) {
        self.avalanche = AvalancheSetting {
            level,
            set_by: operator.to_string(),
            set_at: at,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;
    use crate::preprocess::FixSource;

    pub(crate) fn row(id: u32, t: Timestamp) -> ContextRow {
        ContextRow {
            tourist: TouristId(id),
            fix: GeoFix {
                tourist: TouristId(id),
                point: GeoPoint::new(0.0, 0.0),
                source: FixSource::Gps,
                accuracy: 5.0,
                timestamp: t,
            },
            trail: TrailId(0),
            arclength: 0.0,
            difficulty: Difficulty::D1,
            tags: WeatherTags::default(),
            station: WeatherStationId(0),
            day_night: DayNight::Day,
            season: Season::Summer,
            avalanche: AvalancheLevel::LOWEST,
            motion_idle_seconds: 0,
            off_trail: false,
            in_special_place: false,
            group: None,
            leader_distance: None,
            nearest_dangerous_animal: None,
            updated_at: t,
        }
    }

    fn repo() -> Repository {
        Repository::new(vec![Difficulty::D1, Difficulty::D3], default_alert_sets())
    }

    #[test]
    fn upsert_roundtrip_and_previous() {
        let mut r = repo();
        assert_eq!(r.upsert_row(row(1, 0)).unwrap(), None);
        assert_eq!(r.row(TouristId(1)), Some(&row(1, 0)));
        let prev = r.upsert_row(row(1, 30)).unwrap();
        assert_eq!(prev, Some(row(1, 0)));
        assert_eq!(r.row(TouristId(1)).unwrap().updated_at, 30);
    }

    #[test]
    fn write_after_departure_is_stale() {
        let mut r = repo();
        r.upsert_row(row(1, 0)).unwrap();
        r.depart(TouristId(1));
        assert_eq!(
            r.upsert_row(row(1, 30)),
            Err(RepoError::StaleWrite(TouristId(1)))
        );
        assert!(r.is_empty());
    }

    #[test]
    fn invalid_rows_rejected() {
        let mut r = repo();
        let mut bad = row(1, 0);
        bad.trail = TrailId(1);
        assert!(matches!(
            r.upsert_row(bad),
            Err(RepoError::InvalidRow { .. })
        ));
        r.upsert_row(row(2, 60)).unwrap();
        assert!(matches!(
            r.upsert_row(row(2, 30)),
            Err(RepoError::InvalidRow { .. })
        ));
    }

    #[test]
    fn snapshot_isolation() {
        let mut r = repo();
        assert!(r.snapshot().is_empty());
        r.upsert_row(row(1, 0)).unwrap();
        let snap = r.snapshot();
        r.upsert_row(row(1, 30)).unwrap();
        r.upsert_row(row(2, 30)).unwrap();
        assert_eq!(snap.len(), 1);
        assert_eq!(snap.rows[&TouristId(1)].updated_at, 0);
    }

    #[test]
    fn alert_swap_is_atomic_per_snapshot() {
        let mut r = repo();
        let before = r.snapshot();
        assert_eq!(r.swap_alert_set("Alerts2").unwrap(), "Alerts1");
        let after = r.snapshot();
        assert_eq!(before.alerts.name, "Alerts1");
        assert_eq!(after.alerts.name, "Alerts2");
        assert_eq!(r.swap_alert_set("Alerts2").unwrap(), "Alerts2");
        assert_eq!(
            r.swap_alert_set("Nope"),
            Err(RepoError::NotFound("Nope".into()))
        );
    }
}
