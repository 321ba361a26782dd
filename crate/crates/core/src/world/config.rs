//! TOML area configuration: schema, parsing and validation.

use super::{
    AreaConfig, BtsStation, BtsStationId, DetectorConfig, FactorThresholds, Junction, Schedule,
    SpecialPlace, Thresholds, Trail, TrailId, WeatherStation, WeatherStationId,
};
use crate::context::{Difficulty, Season};
use crate::geo::{Bounds, GeoPoint, LatLon, LocalFrame, TrailPolyline};
use chrono::{NaiveDate, NaiveTime};
use serde::Deserialize;
use std::collections::BTreeSet;
use thiserror::Error;

const DEFAULT_AREA: &str = include_str!("../../assets/area.toml");

/// Vertices closer than this are treated as the same junction.
const JUNCTION_TOLERANCE: f64 = 1.0;
/// Sampling step when checking BTS coverage along trails.
const COVERAGE_STEP: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid area config:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawArea {
    pub area: RawAreaSection,
    #[serde(default)]
    pub trail: Vec<RawTrail>,
    #[serde(default)]
    pub weather_station: Vec<RawWeatherStation>,
    #[serde(default)]
    pub bts_station: Vec<RawBtsStation>,
    pub thresholds: RawThresholds,
    #[serde(default)]
    pub detectors: Option<RawDetectors>,
    pub schedule: RawSchedule,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawAreaSection {
    pub name: String,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub season: Season,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpecialPlace {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTrail {
    pub id: String,
    pub difficulty: Difficulty,
    pub points: Vec<[f64; 2]>,
    /// Arclengths; the literal `"end"` is accepted as the trail length.
    #[serde(default)]
    pub entry_points: Vec<EntryPoint>,
    #[serde(default)]
    pub special_places: Vec<RawSpecialPlace>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EntryPoint {
    At(f64),
    Named(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawWeatherStation {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub influence_radius: f64,
    #[serde(default)]
    pub exposure: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBtsStation {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub max_range: f64,
    pub path_loss_exponent: f64,
    pub noise_sigma: f64,
    pub reference_rssi: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawThresholds {
    pub wind: [f64; 2],
    pub visibility: [f64; 2],
    pub temperature_summer: [f64; 2],
    pub temperature_winter: [f64; 2],
    pub rain: [f64; 2],
    pub off_trail: f64,
    pub accuracy: f64,
    pub group_radius: f64,
    pub comparability: f64,
    pub entry_radius: f64,
    pub signal_timeout: u64,
    pub motion_radius: f64,
    pub station_trail_radius: f64,
    pub bts_nominal_accuracy: f64,
    pub gps_accuracy: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDetectors {
    pub leader_distance: f64,
    pub animal_distance: f64,
    pub idle_seconds: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSchedule {
    pub start_date: String,
    pub start_time: String,
    pub sunrise: String,
    pub sunset: String,
}

/// The area shipped with the crate.
pub fn default_area() -> AreaConfig {
    load_area(DEFAULT_AREA).expect("embedded area config is valid")
}

/// Parses and validates an area config; reports every invariant breach at once.
pub fn load_area(text: &str) -> Result<AreaConfig, ConfigError> {
    let raw: RawArea = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    build(raw)
}

fn parse_time(field: &str, s: &str, errors: &mut Vec<String>) -> NaiveTime {
    NaiveTime::parse_from_str(s, "%H:%M")
        .or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
        .unwrap_or_else(|_| {
            errors.push(format!("schedule.{field}: cannot parse time {s:?}"));
            NaiveTime::MIN
        })
}

fn thresholds(
    name: &str,
    pair: [f64; 2],
    ascending: bool,
    errors: &mut Vec<String>,
) -> FactorThresholds {
    let [level2, level3] = pair;
    let ordered = if ascending {
        level2 < level3
    } else {
        level2 > level3
    };
    if !level2.is_finite() || !level3.is_finite() || !ordered {
        let dir = if ascending {
            "increasing"
        } else {
            "decreasing"
        };
        errors.push(format!(
            "thresholds.{name}: {pair:?} must be strictly {dir}"
        ));
    }
    FactorThresholds { level2, level3 }
}

fn positive(field: String, v: f64, errors: &mut Vec<String>) {
    if !(v.is_finite() && v > 0.0) {
        errors.push(format!("{field}: must be positive, got {v}"));
    }
}

fn build(raw: RawArea) -> Result<AreaConfig, ConfigError> {
    let mut errors = Vec::new();
    let a = &raw.area;

    let bounds = Bounds {
        min: GeoPoint::new(a.min_x, a.min_y),
        max: GeoPoint::new(a.max_x, a.max_y),
    };
    if !(a.min_x < a.max_x && a.min_y < a.max_y) {
        errors.push("area: bounds are empty".to_string());
    }
    if !(-90.0..=90.0).contains(&a.origin_lat) || !(-180.0..=180.0).contains(&a.origin_lon) {
        errors.push("area: origin out of range".to_string());
    }

    if raw.trail.is_empty() {
        errors.push("trail: at least one trail is required".to_string());
    }
    let mut trails = Vec::new();
    let mut labels = BTreeSet::new();
    for (i, t) in raw.trail.iter().enumerate() {
        if !labels.insert(t.id.clone()) {
            errors.push(format!("trail[{i}]: duplicate id {}", t.id));
        }
        let points: Vec<GeoPoint> = t
            .points
            .iter()
            .map(|[x, y]| GeoPoint::new(*x, *y))
            .collect();
        for p in &points {
            if !bounds.contains(*p) {
                errors.push(format!(
                    "trail[{i}] {}: point {p} outside area bounds",
                    t.id
                ));
            }
        }
        let polyline = match TrailPolyline::new(points) {
            Ok(p) => p,
            Err(e) => {
                errors.push(format!("trail[{i}] {}: {e}", t.id));
                continue;
            }
        };
        let length = polyline.length();
        let mut entry_points = Vec::new();
        for e in &t.entry_points {
            match e {
                EntryPoint::At(s) if (0.0..=length).contains(s) => entry_points.push(*s),
                EntryPoint::At(s) => errors.push(format!(
                    "trail[{i}] {}: entry point {s} outside [0, {length:.1}]",
                    t.id
                )),
                EntryPoint::Named(n) if n == "end" => entry_points.push(length),
                EntryPoint::Named(n) if n == "start" => entry_points.push(0.0),
                EntryPoint::Named(n) => {
                    errors.push(format!("trail[{i}] {}: unknown entry point {n:?}", t.id))
                }
            }
        }
        let mut special_places = Vec::new();
        for sp in &t.special_places {
            positive(
                format!("trail[{i}] {}: special place radius", t.id),
                sp.radius,
                &mut errors,
            );
            special_places.push(SpecialPlace {
                center: GeoPoint::new(sp.x, sp.y),
                radius: sp.radius,
            });
        }
        trails.push(Trail {
            id: TrailId(trails.len() as u16),
            label: t.id.clone(),
            polyline,
            difficulty: t.difficulty,
            entry_points,
            special_places,
        });
    }

    if raw.weather_station.is_empty() {
        errors.push("weather_station: at least one station is required".to_string());
    }
    let mut weather_stations = Vec::new();
    for (i, w) in raw.weather_station.iter().enumerate() {
        positive(
            format!("weather_station[{i}] {}: influence_radius", w.id),
            w.influence_radius,
            &mut errors,
        );
        if !(0.0..=1.0).contains(&w.exposure) {
            errors.push(format!(
                "weather_station[{i}] {}: exposure must lie in [0, 1]",
                w.id
            ));
        }
        weather_stations.push(WeatherStation {
            id: WeatherStationId(i as u16),
            label: w.id.clone(),
            location: GeoPoint::new(w.x, w.y),
            influence_radius: w.influence_radius,
            exposure: w.exposure,
        });
    }

    let mut bts_stations = Vec::new();
    for (i, b) in raw.bts_station.iter().enumerate() {
        positive(
            format!("bts_station[{i}] {}: max_range", b.id),
            b.max_range,
            &mut errors,
        );
        if b.path_loss_exponent.is_nan() || b.path_loss_exponent < 1.0 {
            errors.push(format!(
                "bts_station[{i}] {}: path_loss_exponent must be >= 1",
                b.id
            ));
        }
        if b.noise_sigma.is_nan() || b.noise_sigma < 0.0 {
            errors.push(format!(
                "bts_station[{i}] {}: noise_sigma must be >= 0",
                b.id
            ));
        }
        bts_stations.push(BtsStation {
            id: BtsStationId(i as u16),
            label: b.id.clone(),
            location: GeoPoint::new(b.x, b.y),
            max_range: b.max_range,
            path_loss_exponent: b.path_loss_exponent,
            noise_sigma: b.noise_sigma,
            reference_rssi: b.reference_rssi,
        });
    }

    let rt = &raw.thresholds;
    let th = Thresholds {
        wind: thresholds("wind", rt.wind, true, &mut errors),
        visibility: thresholds("visibility", rt.visibility, false, &mut errors),
        temperature_summer: thresholds(
            "temperature_summer",
            rt.temperature_summer,
            false,
            &mut errors,
        ),
        temperature_winter: thresholds(
            "temperature_winter",
            rt.temperature_winter,
            false,
            &mut errors,
        ),
        rain: thresholds("rain", rt.rain, true, &mut errors),
        off_trail: rt.off_trail,
        accuracy: rt.accuracy,
        group_radius: rt.group_radius,
        comparability: rt.comparability,
        entry_radius: rt.entry_radius,
        signal_timeout: rt.signal_timeout,
        motion_radius: rt.motion_radius,
        station_trail_radius: rt.station_trail_radius,
        bts_nominal_accuracy: rt.bts_nominal_accuracy,
        gps_accuracy: rt.gps_accuracy,
    };
    for (name, v) in [
        ("off_trail", th.off_trail),
        ("accuracy", th.accuracy),
        ("group_radius", th.group_radius),
        ("entry_radius", th.entry_radius),
        ("motion_radius", th.motion_radius),
        ("station_trail_radius", th.station_trail_radius),
        ("bts_nominal_accuracy", th.bts_nominal_accuracy),
        ("gps_accuracy", th.gps_accuracy),
    ] {
        positive(format!("thresholds.{name}"), v, &mut errors);
    }
    if !(0.0..1.0).contains(&th.comparability) {
        errors.push("thresholds.comparability: must lie in [0, 1)".to_string());
    }
    if th.gps_accuracy >= th.bts_nominal_accuracy {
        errors.push("thresholds: gps_accuracy must be below bts_nominal_accuracy".to_string());
    }
    if th.signal_timeout == 0 {
        errors.push("thresholds.signal_timeout: must be positive".to_string());
    }

    let detectors = match &raw.detectors {
        Some(d) => {
            positive(
                "detectors.leader_distance".into(),
                d.leader_distance,
                &mut errors,
            );
            positive(
                "detectors.animal_distance".into(),
                d.animal_distance,
                &mut errors,
            );
            DetectorConfig {
                leader_distance: d.leader_distance,
                animal_distance: d.animal_distance,
                idle_seconds: d.idle_seconds,
            }
        }
        None => DetectorConfig::default(),
    };

    let rs = &raw.schedule;
    let date = NaiveDate::parse_from_str(&rs.start_date, "%Y-%m-%d").unwrap_or_else(|_| {
        errors.push(format!(
            "schedule.start_date: cannot parse date {:?}",
            rs.start_date
        ));
        NaiveDate::MIN
    });
    let schedule = Schedule {
        start: date.and_time(parse_time("start_time", &rs.start_time, &mut errors)),
        sunrise: parse_time("sunrise", &rs.sunrise, &mut errors),
        sunset: parse_time("sunset", &rs.sunset, &mut errors),
    };
    if schedule.sunrise >= schedule.sunset {
        errors.push("schedule: sunrise must precede sunset".to_string());
    }

    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }

    let junctions = find_junctions(&trails);
    let station_trails = weather_stations
        .iter()
        .map(|w| {
            trails
                .iter()
                .filter(|t| t.polyline.project(w.location).distance <= th.station_trail_radius)
                .map(|t| t.id)
                .collect()
        })
        .collect();
    let warnings = coverage_warnings(&trails, &bts_stations);

    Ok(AreaConfig {
        name: raw.area.name,
        frame: LocalFrame {
            origin: LatLon {
                lat: raw.area.origin_lat,
                lon: raw.area.origin_lon,
            },
        },
        bounds,
        season: raw.area.season,
        trails,
        weather_stations,
        bts_stations,
        thresholds: th,
        detectors,
        schedule,
        junctions,
        station_trails,
        warnings,
    })
}

fn find_junctions(trails: &[Trail]) -> Vec<Junction> {
    let mut out = Vec::new();
    for a in trails {
        for (i, p) in a.polyline.points().iter().enumerate() {
            for b in trails.iter().filter(|b| b.id != a.id) {
                for (j, q) in b.polyline.points().iter().enumerate() {
                    if p.distance(q) <= JUNCTION_TOLERANCE {
                        out.push(Junction {
                            trail: a.id,
                            vertex: i,
                            other_trail: b.id,
                            other_vertex: j,
                        });
                    }
                }
            }
        }
    }
    out
}

fn coverage_warnings(trails: &[Trail], bts: &[BtsStation]) -> Vec<String> {
    let mut out = Vec::new();
    for t in trails {
        let n = (t.polyline.length() / COVERAGE_STEP).ceil() as usize;
        let uncovered = (0..=n)
            .map(|k| t.polyline.position_clamped(k as f64 * COVERAGE_STEP))
            .filter(|p| {
                bts.iter()
                    .filter(|b| b.location.distance(p) <= b.max_range)
                    .count()
                    < 2
            })
            .count();
        if uncovered > 0 {
            out.push(format!(
                "trail {}: {uncovered} sampled points reach fewer than 2 BTS stations",
                t.label
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_area_has_eight_trails() {
        let area = default_area();
        assert_eq!(area.trails.len(), 8);
        assert!(area.warnings.is_empty(), "{:?}", area.warnings);
        assert!(!area.junctions.is_empty());
        for t in &area.trails {
            assert!(t
                .entry_points
                .iter()
                .all(|s| *s >= 0.0 && *s <= t.polyline.length()));
        }
    }

    #[test]
    fn default_trails_have_three_bts_in_range() {
        let area = default_area();
        for t in &area.trails {
            let mut s = 0.0;
            while s <= t.polyline.length() {
                let p = t.polyline.position_clamped(s);
                let n = area
                    .bts_stations
                    .iter()
                    .filter(|b| b.location.distance(&p) <= b.max_range)
                    .count();
                assert!(n >= 3, "{} at {s}", t.label);
                s += 100.0;
            }
        }
    }

    fn replace_trails(body: &str) -> String {
        let start = DEFAULT_AREA.find("[[trail]]").unwrap();
        let end = DEFAULT_AREA.find("[[weather_station]]").unwrap();
        format!(
            "{}{}\n{}",
            &DEFAULT_AREA[..start],
            body,
            &DEFAULT_AREA[end..]
        )
    }

    #[test]
    fn empty_trail_list_is_rejected() {
        let err = load_area(&replace_trails("")).unwrap_err();
        assert!(
            matches!(err, ConfigError::Validation(ref v) if v.iter().any(|m| m.contains("at least one trail")))
        );
    }

    #[test]
    fn single_point_trail_is_rejected() {
        let t = "[[trail]]\nid = \"H1\"\ndifficulty = \"D1\"\npoints = [[0.0, 0.0]]\n";
        assert!(matches!(
            load_area(&replace_trails(t)),
            Err(ConfigError::Validation(_))
        ));
    }

    #[test]
    fn all_failures_are_listed() {
        let t = "[[trail]]\nid = \"H1\"\ndifficulty = \"D1\"\npoints = [[0.0, 0.0]]\n\
                 [[trail]]\nid = \"H2\"\ndifficulty = \"D1\"\npoints = [[0.0, 0.0], [10.0, 0.0]]\nentry_points = [99.0]\n";
        let Err(ConfigError::Validation(v)) = load_area(&replace_trails(t)) else {
            panic!("expected validation error");
        };
        assert_eq!(v.len(), 2, "{v:?}");
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = DEFAULT_AREA.replacen("[area]\n", "[area]\nbogus = 1\n", 1);
        assert!(matches!(load_area(&text), Err(ConfigError::Parse(m)) if m.contains("bogus")));
    }

    #[test]
    fn inverted_thresholds_are_rejected() {
        let text = DEFAULT_AREA.replacen("wind = [8.0, 17.0]", "wind = [17.0, 8.0]", 1);
        assert!(matches!(load_area(&text), Err(ConfigError::Validation(_))));
    }
}
