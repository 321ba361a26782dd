//! Raw sensor data to context: geolocation fusion, route assignment,
//! weather tagging, station selection and presence tracking.

use crate::broker::WeatherReading;
use crate::context::{Season, TagLevel, TouristId, WeatherTags};
use crate::geo::{circle_intersection, GeoPoint};
use crate::world::{
    AreaConfig, BtsStationId, FactorThresholds, Thresholds, Timestamp, TrailId, WeatherStationId,
};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Candidate mismatches closer than this are considered tied.
const TIE_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FixSource {
    Gps,
    BtsTrilateration,
    GroupImproved,
}

impl FixSource {
    pub fn label(self) -> &'static str {
        match self {
            FixSource::Gps => "GPS",
            FixSource::BtsTrilateration => "BTS",
            FixSource::GroupImproved => "GROUP",
        }
    }

    pub fn is_gps(self) -> bool {
        self == FixSource::Gps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeoFix {
    pub tourist: TouristId,
    pub point: GeoPoint,
    pub source: FixSource,
    /// Estimated error radius, meters.
    pub accuracy: f64,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowAccuracyEvent {
    pub tourist: TouristId,
    pub station: BtsStationId,
    pub mismatch: f64,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtsObservation {
    pub station: BtsStationId,
    pub rssi: f64,
}

/// A group member's GPS position usable to refine a BTS fix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupAnchor {
    pub point: GeoPoint,
    pub trail: TrailId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geolocation {
    pub fix: GeoFix,
    pub low_accuracy: Option<LowAccuracyEvent>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("{0}: fewer than two BTS measurements and no GPS fix")]
    Unlocatable(TouristId),
    #[error("non-finite value in weather reading from station {0:?}")]
    NonFiniteReading(WeatherStationId),
}

/// Fuses one cycle's measurements for a tourist into a single fix.
pub fn a1_geolocate(
    area: &AreaConfig,
    tourist: TouristId,
    timestamp: Timestamp,
    bts: &[BtsObservation],
    gps: Option<GeoPoint>,
    group: &[GroupAnchor],
    previous: Option<GeoPoint>,
) -> Result<Geolocation, PreprocessError> {
    let th = &area.thresholds;
    if let Some(point) = gps {
        return Ok(Geolocation {
            fix: GeoFix {
                tourist,
                point,
                source: FixSource::Gps,
                accuracy: th.gps_accuracy,
                timestamp,
            },
            low_accuracy: None,
        });
    }
    let circles: Vec<(BtsStationId, GeoPoint, f64, f64)> = bts
        .iter()
        .map(|o| {
            let s = area.bts_station(o.station);
            (o.station, s.location, s.distance_for(o.rssi), o.rssi)
        })
        .collect();
    let tri = trilaterate(&circles, previous, area).ok_or(PreprocessError::Unlocatable(tourist))?;

    let mut fix = GeoFix {
        tourist,
        point: tri.point,
        source: FixSource::BtsTrilateration,
        accuracy: th.bts_nominal_accuracy.max(tri.mismatch.unwrap_or(0.0)),
        timestamp,
    };
    let low_accuracy = match (tri.mismatch, tri.check_station) {
        (Some(m), Some(station)) if m > th.accuracy => Some(LowAccuracyEvent {
            tourist,
            station,
            mismatch: m,
            timestamp,
        }),
        _ => None,
    };

    let anchor = group
        .iter()
        .filter(|a| a.point.distance(&fix.point) <= th.group_radius)
        .min_by(|a, b| {
            a.point
                .distance(&fix.point)
                .total_cmp(&b.point.distance(&fix.point))
        });
    if let Some(a) = anchor {
        fix.point = area.trail(a.trail).polyline.project(fix.point).point;
        fix.source = FixSource::GroupImproved;
        fix.accuracy = th.bts_nominal_accuracy;
    }
    Ok(Geolocation { fix, low_accuracy })
}

/// Result of intersecting the two strongest circles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trilateration {
    pub point: GeoPoint,
    /// |distance to the third station − its rssi-implied distance|.
    pub mismatch: Option<f64>,
    pub check_station: Option<BtsStationId>,
}

/// `circles` holds (station, center, rssi-implied radius, rssi).
pub fn trilaterate(
    circles: &[(BtsStationId, GeoPoint, f64, f64)],
    previous: Option<GeoPoint>,
    area: &AreaConfig,
) -> Option<Trilateration> {
    if circles.len() < 2 {
        return None;
    }
    let mut sorted = circles.to_vec();
    // Strongest first; station id breaks ties.
    sorted.sort_by(|a, b| b.3.total_cmp(&a.3).then(a.0.cmp(&b.0)));
    let (_, c1, r1, _) = sorted[0];
    let (_, c2, r2, _) = sorted[1];
    let candidates = candidate_points(c1, r1, c2, r2)?;

    let mismatch = |p: GeoPoint, k: usize| (p.distance(&sorted[k].1) - sorted[k].2).abs();
    let point = if candidates.len() == 1 {
        candidates[0]
    } else if sorted.len() >= 3 {
        let (a, b) = (candidates[0], candidates[1]);
        let (ma, mb) = (mismatch(a, 2), mismatch(b, 2));
        if (ma - mb).abs() > TIE_EPSILON {
            if ma < mb {
                a
            } else {
                b
            }
        } else {
            let total = |p| (2..sorted.len()).map(|k| mismatch(p, k)).sum::<f64>();
            if total(a) <= total(b) {
                a
            } else {
                b
            }
        }
    } else if let Some(prev) = previous {
        nearest_to(&candidates, |p| p.distance(&prev))
    } else {
        nearest_to(&candidates, |p| {
            area.trails
                .iter()
                .map(|t| t.polyline.project(p).distance)
                .fold(f64::INFINITY, f64::min)
        })
    };
    let (mismatch, check_station) = if sorted.len() >= 3 {
        (Some(mismatch(point, 2)), Some(sorted[2].0))
    } else {
        (None, None)
    };
    Some(Trilateration {
        point,
        mismatch,
        check_station,
    })
}

fn nearest_to(candidates: &[GeoPoint], key: impl Fn(GeoPoint) -> f64) -> GeoPoint {
    let (a, b) = (candidates[0], candidates[1]);
    if key(a) <= key(b) {
        a
    } else {
        b
    }
}

/// Exact intersections, or the closest-approach point on the center line when
/// noise has pushed the circles apart.
fn candidate_points(c1: GeoPoint, r1: f64, c2: GeoPoint, r2: f64) -> Option<Vec<GeoPoint>> {
    match circle_intersection(c1, r1, c2, r2) {
        Ok(pts) if !pts.is_empty() => Some(pts),
        Ok(_) => {
            let d = c1.distance(&c2);
            let a = (d * d + r1 * r1 - r2 * r2) / (2.0 * d);
            Some(vec![c1.lerp(&c2, a / d)])
        }
        Err(_) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteAssignment {
    pub trail: TrailId,
    pub arclength: f64,
    pub distance: f64,
    pub off_trail: bool,
}

/// Nearest trail, keeping `previous` while the fix stays within the
/// off-trail threshold of it.
pub fn assign_route(
    area: &AreaConfig,
    point: GeoPoint,
    previous: Option<TrailId>,
    off_trail_threshold: f64,
) -> RouteAssignment {
    let assignment = |id: TrailId| {
        let p = area.trail(id).polyline.project(point);
        RouteAssignment {
            trail: id,
            arclength: p.arclength,
            distance: p.distance,
            off_trail: p.distance > off_trail_threshold,
        }
    };
    if let Some(prev) = previous {
        let a = assignment(prev);
        if !a.off_trail {
            return a;
        }
    }
    area.trails
        .iter()
        .map(|t| assignment(t.id))
        .reduce(|best, a| if a.distance < best.distance { a } else { best })
        .expect("area has at least one trail")
}

pub fn bin(value: f64, t: FactorThresholds) -> TagLevel {
    let (v, l2, l3) = if t.ascending() {
        (value, t.level2, t.level3)
    } else {
        (-value, -t.level2, -t.level3)
    };
    if v < l2 {
        TagLevel::L1
    } else if v < l3 {
        TagLevel::L2
    } else {
        TagLevel::L3
    }
}

pub fn a2_tag_weather(
    reading: &WeatherReading,
    thresholds: &Thresholds,
    season: Season,
) -> Result<WeatherTags, PreprocessError> {
    let r = reading;
    if ![r.wind, r.visibility, r.temperature, r.rain]
        .iter()
        .all(|v| v.is_finite())
    {
        return Err(PreprocessError::NonFiniteReading(r.station));
    }
    Ok(WeatherTags {
        wind: bin(r.wind, thresholds.wind),
        fog: bin(r.visibility, thresholds.visibility),
        temperature: bin(r.temperature, thresholds.temperature(season)),
        rain: bin(r.rain, thresholds.rain),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationChoice {
    pub station: WeatherStationId,
    /// Stations whose influence radius covers the tourist.
    pub in_range: usize,
}

/// Picks the weather station whose data describes the tourist's position.
pub fn select_station(
    area: &AreaConfig,
    point: GeoPoint,
    trail: TrailId,
    arclength: f64,
    direction: f64,
) -> StationChoice {
    let dist = |s: &crate::world::WeatherStation| s.location.distance(&point);
    let in_range: Vec<_> = area
        .weather_stations
        .iter()
        .filter(|s| dist(s) <= s.influence_radius)
        .collect();
    if in_range.is_empty() {
        let nearest = area
            .weather_stations
            .iter()
            .min_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.id.cmp(&b.id)))
            .expect("area has a weather station");
        return StationChoice {
            station: nearest.id,
            in_range: 0,
        };
    }
    let on_trail: Vec<_> = in_range
        .iter()
        .copied()
        .filter(|s| area.station_on_trail(s.id, trail))
        .collect();
    let mut pool = if on_trail.is_empty() {
        in_range.clone()
    } else {
        on_trail
    };
    pool.sort_by(|a, b| dist(a).total_cmp(&dist(b)).then(a.id.cmp(&b.id)));
    let mut chosen = pool[0];
    if let Some(second) = pool.get(1) {
        let (d1, d2) = (dist(pool[0]), dist(second));
        if d2 - d1 < area.thresholds.comparability * d2 {
            let (tx, ty) = area.trail(trail).polyline.tangent_at(arclength);
            let ahead = |s: &crate::world::WeatherStation| {
                (s.location.x - point.x) * tx * direction
                    + (s.location.y - point.y) * ty * direction
                    > 0.0
            };
            if !ahead(pool[0]) && ahead(second) {
                chosen = second;
            }
        }
    }
    StationChoice {
        station: chosen.id,
        in_range: in_range.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DepartureKind {
    Clean,
    LostSignal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PresenceEvent {
    Arrival {
        tourist: TouristId,
        at: Timestamp,
    },
    Departure {
        tourist: TouristId,
        at: Timestamp,
        kind: DepartureKind,
    },
}

#[derive(Debug, Clone, Copy)]
struct Presence {
    last_fix: Timestamp,
    last_point: GeoPoint,
}

/// Arrival on the first in-bounds fix; departure when fixes stop, either at an
/// entry point (clean) or after the signal timeout (lost signal).
#[derive(Debug, Default, Clone)]
pub struct PresenceTracker {
    present: BTreeMap<TouristId, Presence>,
    departed: std::collections::BTreeSet<TouristId>,
}

impl PresenceTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_present(&self, id: TouristId) -> bool {
        self.present.contains_key(&id)
    }

    pub fn present(&self) -> impl Iterator<Item = TouristId> + '_ {
        self.present.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.present.len()
    }

    pub fn is_empty(&self) -> bool {
        self.present.is_empty()
    }

    pub fn last_fix_time(&self, id: TouristId) -> Option<Timestamp> {
        self.present.get(&id).map(|p| p.last_fix)
    }

    /// Records a fix; returns an arrival for the first in-bounds one.
    pub fn observe(&mut self, area: &AreaConfig, fix: &GeoFix) -> Option<PresenceEvent> {
        if self.departed.contains(&fix.tourist) || !area.bounds.contains(fix.point) {
            return None;
        }
        let entry = Presence {
            last_fix: fix.timestamp,
            last_point: fix.point,
        };
        match self.present.insert(fix.tourist, entry) {
            None => Some(PresenceEvent::Arrival {
                tourist: fix.tourist,
                at: fix.timestamp,
            }),
            Some(_) => None,
        }
    }

    /// Called once per cycle after all fixes of the cycle were observed.
    pub fn sweep(&mut self, area: &AreaConfig, now: Timestamp) -> Vec<PresenceEvent> {
        let timeout = area.thresholds.signal_timeout;
        let mut out = Vec::new();
        for (id, p) in &self.present {
            if p.last_fix >= now {
                continue;
            }
            let kind = if area.near_entry_point(p.last_point) {
                DepartureKind::Clean
            } else if now - p.last_fix > timeout {
                DepartureKind::LostSignal
            } else {
                continue;
            };
            out.push(PresenceEvent::Departure {
                tourist: *id,
                at: now,
                kind,
            });
        }
        for e in &out {
            if let PresenceEvent::Departure { tourist, .. } = e {
                self.present.remove(tourist);
                self.departed.insert(*tourist);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::TagLevel::*;
    use crate::world::default_area;

    fn three_station_area() -> AreaConfig {
        let mut area = default_area();
        area.bts_stations.truncate(3);
        let place = [(0.0, 0.0), (6.0, 0.0), (3.0, 10.0)];
        for (s, (x, y)) in area.bts_stations.iter_mut().zip(place) {
            s.location = GeoPoint::new(x, y);
            s.path_loss_exponent = 2.0;
            s.reference_rssi = -30.0;
        }
        area
    }

    fn obs(area: &AreaConfig, dists: &[f64]) -> Vec<BtsObservation> {
        dists
            .iter()
            .enumerate()
            .map(|(i, d)| BtsObservation {
                station: BtsStationId(i as u16),
                rssi: area.bts_stations[i].rssi_at(*d),
            })
            .collect()
    }

    #[test]
    fn three_four_five_disambiguation() {
        let area = three_station_area();
        let g = a1_geolocate(
            &area,
            TouristId(1),
            0,
            &obs(&area, &[5.0, 5.0, 6.0]),
            None,
            &[],
            None,
        )
        .unwrap();
        assert!(g.fix.point.distance(&GeoPoint::new(3.0, 4.0)) < 1e-6);
        assert_eq!(g.fix.source, FixSource::BtsTrilateration);
        let g = a1_geolocate(
            &area,
            TouristId(1),
            0,
            &obs(&area, &[5.0, 5.0, 14.0]),
            None,
            &[],
            None,
        )
        .unwrap();
        assert!(g.fix.point.distance(&GeoPoint::new(3.0, -4.0)) < 1e-6);
    }

    #[test]
    fn gps_wins_and_unlocatable() {
        let area = three_station_area();
        let o = obs(&area, &[5.0, 5.0, 6.0]);
        let g = a1_geolocate(
            &area,
            TouristId(1),
            0,
            &o,
            Some(GeoPoint::new(9.0, 9.0)),
            &[],
            None,
        )
        .unwrap();
        assert_eq!(g.fix.source, FixSource::Gps);
        assert!(g.fix.accuracy < area.thresholds.bts_nominal_accuracy);
        assert_eq!(
            a1_geolocate(&area, TouristId(1), 0, &o[..1], None, &[], None),
            Err(PreprocessError::Unlocatable(TouristId(1)))
        );
    }

    #[test]
    fn two_stations_use_previous_fix() {
        let area = three_station_area();
        let o = obs(&area, &[5.0, 5.0]);
        let prev = Some(GeoPoint::new(3.0, -3.0));
        let g = a1_geolocate(&area, TouristId(1), 0, &o, None, &[], prev).unwrap();
        assert!(g.fix.point.distance(&GeoPoint::new(3.0, -4.0)) < 1e-6);
        assert!(g.low_accuracy.is_none());
    }

    #[test]
    fn large_third_station_mismatch_is_reported() {
        let area = three_station_area();
        let g = a1_geolocate(
            &area,
            TouristId(1),
            7,
            &obs(&area, &[5.0, 5.0, 200.0]),
            None,
            &[],
            None,
        )
        .unwrap();
        let ev = g.low_accuracy.unwrap();
        assert_eq!(ev.station, BtsStationId(2));
        assert!((ev.mismatch - (200.0 - 14.0)).abs() < 1e-6);
    }

    #[test]
    fn group_anchor_snaps_to_member_trail() {
        let area = default_area();
        let h2 = area.trail_by_label("H2").unwrap();
        let truth = h2.polyline.position_clamped(1000.0);
        let off = GeoPoint::new(truth.x, truth.y + 30.0);
        let o: Vec<_> = area
            .bts_stations
            .iter()
            .map(|s| BtsObservation {
                station: s.id,
                rssi: s.rssi_at(s.location.distance(&off)),
            })
            .collect();
        let anchor = GroupAnchor {
            point: truth,
            trail: h2.id,
        };
        let g = a1_geolocate(&area, TouristId(1), 0, &o, None, &[anchor], None).unwrap();
        assert_eq!(g.fix.source, FixSource::GroupImproved);
        assert!(h2.polyline.project(g.fix.point).distance < 1e-6);
    }

    #[test]
    fn route_assignment() {
        let area = default_area();
        let h2 = area.trail_by_label("H2").unwrap();
        let v = h2.polyline.points()[1];
        let a = assign_route(&area, v, None, 50.0);
        assert_eq!(a.trail, h2.id);
        assert!(!a.off_trail);
        let far = GeoPoint::new(-4400.0, -1200.0);
        assert!(assign_route(&area, far, None, 50.0).off_trail);
    }

    #[test]
    fn route_hysteresis_at_crossing() {
        let area = default_area();
        let h1 = area.trail_by_label("H1").unwrap().id;
        let h4 = area.trail_by_label("H4").unwrap().id;
        let summit = GeoPoint::new(0.0, 0.0);
        assert_eq!(assign_route(&area, summit, Some(h4), 50.0).trail, h4);
        assert_eq!(assign_route(&area, summit, Some(h1), 50.0).trail, h1);
    }

    #[test]
    fn weather_binning() {
        let area = default_area();
        let th = &area.thresholds;
        assert_eq!(bin(10.0, th.wind), L2);
        assert_eq!(bin(8.0, th.wind), L2);
        assert_eq!(bin(7.99, th.wind), L1);
        assert_eq!(bin(17.0, th.wind), L3);
        assert_eq!(bin(5000.0, th.visibility), L1);
        assert_eq!(bin(1000.0, th.visibility), L2);
        assert_eq!(bin(200.0, th.visibility), L3);
        assert_eq!(bin(-20.0, th.temperature_winter), L3);
        let r = WeatherReading {
            station: WeatherStationId(0),
            wind: f64::NAN,
            visibility: 1.0,
            temperature: 1.0,
            rain: 1.0,
        };
        assert!(a2_tag_weather(&r, th, Season::Summer).is_err());
    }

    fn line_area(stations: &[(f64, f64)]) -> AreaConfig {
        let mut area = default_area();
        let h2 = area.trail_by_label("H2").unwrap().id;
        let proto = area.weather_stations[0].clone();
        area.weather_stations = stations
            .iter()
            .enumerate()
            .map(|(i, (x, y))| crate::world::WeatherStation {
                id: WeatherStationId(i as u16),
                label: format!("S{i}"),
                location: GeoPoint::new(*x, *y),
                influence_radius: 1000.0,
                ..proto.clone()
            })
            .collect();
        area.station_trails = vec![vec![h2]; stations.len()];
        area
    }

    #[test]
    fn station_selection_rules() {
        let area = default_area();
        let h2 = area.trail_by_label("H2").unwrap();
        let s = 400.0 + h2.polyline.cumulative_arclength()[1];
        let p = h2.polyline.position_clamped(s);
        let behind = h2.polyline.position_clamped(s - 300.0);
        let ahead = h2.polyline.position_clamped(s + 100.0);
        let area = line_area(&[(behind.x, behind.y), (ahead.x, ahead.y)]);
        let c = select_station(&area, p, h2.id, s, 1.0);
        assert_eq!(c.in_range, 2);
        assert_eq!(c.station, WeatherStationId(1));

        // Equidistant ahead/behind: direction decides.
        let a = h2.polyline.position_clamped(s + 200.0);
        let b = h2.polyline.position_clamped(s - 200.0);
        let area = line_area(&[(b.x, b.y), (a.x, a.y)]);
        assert_eq!(
            select_station(&area, p, h2.id, s, 1.0).station,
            WeatherStationId(1)
        );
        assert_eq!(
            select_station(&area, p, h2.id, s, -1.0).station,
            WeatherStationId(0)
        );
    }

    #[test]
    fn station_on_own_trail_preferred() {
        let mut area = line_area(&[(0.0, -2300.0), (0.0, -2150.0)]);
        let h2 = area.trail_by_label("H2").unwrap().id;
        let h3 = area.trail_by_label("H3").unwrap().id;
        area.station_trails = vec![vec![h2], vec![h3]];
        let p = GeoPoint::new(0.0, -2400.0);
        let c = select_station(&area, p, h3, 0.0, 1.0);
        assert_eq!(c.station, WeatherStationId(1));
    }

    #[test]
    fn presence_lifecycle() {
        let area = default_area();
        let h1 = area.trail_by_label("H1").unwrap();
        let entry = h1.polyline.start();
        let mid = h1.polyline.position_clamped(1000.0);
        let fix = |id, p, t| GeoFix {
            tourist: TouristId(id),
            point: p,
            source: FixSource::Gps,
            accuracy: 5.0,
            timestamp: t,
        };
        let mut tr = PresenceTracker::new();
        assert!(matches!(
            tr.observe(&area, &fix(1, entry, 0)),
            Some(PresenceEvent::Arrival { at: 0, .. })
        ));
        assert!(tr.observe(&area, &fix(2, mid, 0)).is_some());
        assert!(tr.observe(&area, &fix(1, entry, 30)).is_none());
        assert!(tr.sweep(&area, 30).is_empty());
        // Tourist 1 stops reporting at the entry point: clean departure.
        let ev = tr.sweep(&area, 60);
        assert!(ev.contains(&PresenceEvent::Departure {
            tourist: TouristId(1),
            at: 60,
            kind: DepartureKind::Clean
        }));
        // Tourist 2 went silent mid-trail: departs only after the timeout.
        assert!(tr.sweep(&area, 600).is_empty());
        let ev = tr.sweep(&area, 630);
        assert_eq!(
            ev,
            vec![PresenceEvent::Departure {
                tourist: TouristId(2),
                at: 630,
                kind: DepartureKind::LostSignal
            }]
        );
        assert!(tr.is_empty());
        assert!(tr.observe(&area, &fix(2, mid, 660)).is_none());
    }
}
