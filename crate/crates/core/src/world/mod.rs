//! Static and dynamic model of the monitored area.

mod config;

pub use config::{default_area, load_area, ConfigError, RawArea};

use crate::context::{DayNight, Difficulty, Season, TouristId};
use crate::geo::{Bounds, GeoPoint, LocalFrame, TrailPolyline};
use chrono::{NaiveDateTime, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};

/// Seconds of simulated time since the start of a run.
pub type Timestamp = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrailId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeatherStationId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BtsStationId(pub u16);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialPlace {
    pub center: GeoPoint,
    pub radius: f64,
}

impl SpecialPlace {
    pub fn contains(&self, p: GeoPoint) -> bool {
        self.center.distance(&p) <= self.radius
    }
}

#[derive(Debug, Clone)]
pub struct Trail {
    pub id: TrailId,
    pub label: String,
    pub polyline: TrailPolyline,
    pub difficulty: Difficulty,
    /// Arclengths where tourists enter and leave the area.
    pub entry_points: Vec<f64>,
    pub special_places: Vec<SpecialPlace>,
}

impl Trail {
    pub fn entry_positions(&self) -> impl Iterator<Item = GeoPoint> + '_ {
        self.entry_points
            .iter()
            .map(|s| self.polyline.position_clamped(*s))
    }
}

#[derive(Debug, Clone)]
pub struct WeatherStation {
    pub id: WeatherStationId,
    pub label: String,
    pub location: GeoPoint,
    pub influence_radius: f64,
    /// 0 for a sheltered valley site, 1 for a fully exposed ridge.
    pub exposure: f64,
}

#[derive(Debug, Clone)]
pub struct BtsStation {
    pub id: BtsStationId,
    pub label: String,
    pub location: GeoPoint,
    pub max_range: f64,
    pub path_loss_exponent: f64,
    /// Shadowing noise standard deviation in dB.
    pub noise_sigma: f64,
    /// Received power at 1 m, dBm.
    pub reference_rssi: f64,
}

impl BtsStation {
    /// Log-distance path loss: expected RSSI at `distance` meters.
    pub fn rssi_at(&self, distance: f64) -> f64 {
        self.reference_rssi - 10.0 * self.path_loss_exponent * distance.max(1.0).log10()
    }

    /// Inverse of [`rssi_at`](Self::rssi_at).
    pub fn distance_for(&self, rssi: f64) -> f64 {
        10f64.powf((self.reference_rssi - rssi) / (10.0 * self.path_loss_exponent))
    }
}

/// Binning thresholds for one weather factor, ordered by increasing severity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorThresholds {
    pub level2: f64,
    pub level3: f64,
}

impl FactorThresholds {
    /// Whether larger raw values are more severe.
    pub fn ascending(&self) -> bool {
        self.level3 > self.level2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub wind: FactorThresholds,
    pub visibility: FactorThresholds,
    pub temperature_summer: FactorThresholds,
    pub temperature_winter: FactorThresholds,
    pub rain: FactorThresholds,
    /// Projection distance beyond which a fix counts as off-trail.
    pub off_trail: f64,
    /// Trilateration mismatch that raises a low-accuracy event.
    pub accuracy: f64,
    pub group_radius: f64,
    /// Relative distance band within which two stations are comparable.
    pub comparability: f64,
    pub entry_radius: f64,
    /// Seconds without fixes before a tourist is considered gone.
    pub signal_timeout: u64,
    /// Displacement under which a tourist is considered motionless.
    pub motion_radius: f64,
    /// Max distance from a trail for a weather station to belong to it.
    pub station_trail_radius: f64,
    pub bts_nominal_accuracy: f64,
    pub gps_accuracy: f64,
}

impl Thresholds {
    pub fn temperature(&self, season: Season) -> FactorThresholds {
        match season {
            Season::Summer => self.temperature_summer,
            Season::Winter => self.temperature_winter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub leader_distance: f64,
    pub animal_distance: f64,
    pub idle_seconds: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            leader_distance: 200.0,
            animal_distance: 50.0,
            idle_seconds: 15 * 60,
        }
    }
}

/// Maps run-relative timestamps onto wall-clock time and daylight.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start: NaiveDateTime,
    pub sunrise: NaiveTime,
    pub sunset: NaiveTime,
}

impl Schedule {
    pub fn datetime(&self, t: Timestamp) -> NaiveDateTime {
        self.start + chrono::Duration::seconds(t as i64)
    }

    /// Seconds since midnight at `t`.
    pub fn time_of_day(&self, t: Timestamp) -> u32 {
        self.datetime(t).num_seconds_from_midnight()
    }

    pub fn day_night(&self, t: Timestamp) -> DayNight {
        day_night_at(self.datetime(t).time(), self.sunrise, self.sunset)
    }
}

/// Day on the half-open interval `[sunrise, sunset)`.
pub fn day_night_at(time: NaiveTime, sunrise: NaiveTime, sunset: NaiveTime) -> DayNight {
    if time >= sunrise && time < sunset {
        DayNight::Day
    } else {
        DayNight::Night
    }
}

/// Co-located vertices of two different trails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Junction {
    pub trail: TrailId,
    pub vertex: usize,
    pub other_trail: TrailId,
    pub other_vertex: usize,
}

#[derive(Debug, Clone)]
pub struct AreaConfig {
    pub name: String,
    pub frame: LocalFrame,
    pub bounds: Bounds,
    pub season: Season,
    pub trails: Vec<Trail>,
    pub weather_stations: Vec<WeatherStation>,
    pub bts_stations: Vec<BtsStation>,
    pub thresholds: Thresholds,
    pub detectors: DetectorConfig,
    pub schedule: Schedule,
    pub junctions: Vec<Junction>,
    /// Trails each weather station belongs to.
    pub station_trails: Vec<Vec<TrailId>>,
    /// Non-fatal findings, e.g. stretches of trail covered by fewer than two BTS.
    pub warnings: Vec<String>,
}

impl AreaConfig {
    pub fn trail(&self, id: TrailId) -> &Trail {
        &self.trails[id.0 as usize]
    }

    pub fn trail_by_label(&self, label: &str) -> Option<&Trail> {
        self.trails.iter().find(|t| t.label == label)
    }

    pub fn weather_station(&self, id: WeatherStationId) -> &WeatherStation {
        &self.weather_stations[id.0 as usize]
    }

    pub fn bts_station(&self, id: BtsStationId) -> &BtsStation {
        &self.bts_stations[id.0 as usize]
    }

    pub fn difficulty(&self, id: TrailId) -> Difficulty {
        self.trail(id).difficulty
    }

    pub fn station_on_trail(&self, station: WeatherStationId, trail: TrailId) -> bool {
        self.station_trails[station.0 as usize].contains(&trail)
    }

    /// Whether `p` lies inside any special place of any trail.
    pub fn in_special_place(&self, p: GeoPoint) -> bool {
        self.trails
            .iter()
            .flat_map(|t| t.special_places.iter())
            .any(|sp| sp.contains(p))
    }

    /// Whether `p` lies within the entry radius of some entry point.
    pub fn near_entry_point(&self, p: GeoPoint) -> bool {
        let r = self.thresholds.entry_radius;
        self.trails
            .iter()
            .flat_map(|t| t.entry_positions())
            .any(|e| e.distance(&p) <= r)
    }

    pub fn day_night(&self, t: Timestamp) -> DayNight {
        self.schedule.day_night(t)
    }
}

/// How a tourist's phone contributes geolocation data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhoneMode {
    /// Smartphone with the tracking app: GPS fixes plus BTS.
    GpsConsent,
    /// Ordinary phone: BTS only.
    BtsOnly,
    /// GPS-capable phone whose owner declined tracking: BTS only.
    GpsRefused,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TouristState {
    Hiking,
    Lost,
    NoMotion,
    Resting,
    Rescued,
    Evacuating,
    Departed,
}

/// A tourist as the simulator tracks it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tourist {
    pub id: TouristId,
    pub phone_mode: PhoneMode,
    pub group: Option<GroupId>,
    /// m/s
    pub speed: f64,
    pub trail: TrailId,
    pub arclength: f64,
    /// +1 towards the trail end, -1 towards its start.
    pub direction: f64,
    pub state: TouristState,
    /// Position while lost; the trail assignment is kept alongside.
    pub off_trail_position: Option<GeoPoint>,
    pub entered_at: Timestamp,
    pub departed_at: Option<Timestamp>,
}

impl Tourist {
    pub fn position(&self, area: &AreaConfig) -> GeoPoint {
        self.off_trail_position.unwrap_or_else(|| {
            area.trail(self.trail)
                .polyline
                .position_clamped(self.arclength)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub id: GroupId,
    pub leader: TouristId,
    pub members: Vec<TouristId>,
}

impl Group {
    /// Builds a group whose leader is the first listed member.
    pub fn new(id: GroupId, members: Vec<TouristId>) -> Option<Self> {
        let mut sorted = members.clone();
        sorted.sort();
        sorted.dedup();
        if members.len() < 2 || sorted.len() != members.len() {
            return None;
        }
        Some(Self {
            id,
            leader: members[0],
            members,
        })
    }

    pub fn with_leader(mut self, leader: TouristId) -> Option<Self> {
        self.members.contains(&leader).then(|| {
            self.leader = leader;
            self
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnimalId(pub u32);

#[derive(Debug, Clone, PartialEq)]
pub struct Animal {
    pub id: AnimalId,
    pub location: GeoPoint,
    pub speed: f64,
    /// Heading in radians, counter-clockwise from east.
    pub heading: f64,
    pub dangerous: bool,
    pub gps_equipped: bool,
}
