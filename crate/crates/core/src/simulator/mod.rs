//! Environment generator: weather evolution, tourist arrivals, movement and
//! incidents, wandering animals, and the sensor messages they produce.
//!
//! The simulator is a single logical writer advancing an integer clock in
//! fixed ticks. All randomness flows from one seeded ChaCha stream, so a
//! `(seed, params, scenario)` triple always yields the same message stream.

mod preliminary;
mod routing;
mod weather;

pub use preliminary::{
    run_preliminary, CategoryCounts, PreliminaryParams, PreliminaryReport, PreliminaryRow,
};
pub use routing::{Node, TrailGraph};
pub use weather::{Disturbance, ExposureModel, FactorValues, Segment, WeatherScenario};

use crate::broker::{AnimalFix, BtsSignal, Control, Payload, Topic, TouristFix, WeatherReading};
use crate::context::{TouristId, WeatherTags};
use crate::geo::GeoPoint;
use crate::preprocess::a2_tag_weather;
use crate::world::{
    Animal, AnimalId, AreaConfig, Group, GroupId, PhoneMode, Timestamp, Tourist, TouristState,
    TrailId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

const DEFAULT_SCENARIOS: &str = include_str!("../../assets/scenarios.toml");

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("scenario file: {0}")]
    Parse(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("no scenario with id {0}")]
    UnknownScenario(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrivalParams {
    /// Expected number of tourists present at the peak hour.
    pub peak: f64,
    pub peak_hour: f64,
    pub sigma_hours: f64,
    /// Mean of the exponential planned stay.
    pub mean_stay_hours: f64,
    /// Populate the area with its expected occupancy at the start of the run.
    pub warm_start: bool,
}

impl Default for ArrivalParams {
    fn default() -> Self {
        Self {
            peak: 200.0,
            peak_hour: 14.0,
            sigma_hours: 4.0,
            mean_stay_hours: 3.0,
            warm_start: true,
        }
    }
}

impl ArrivalParams {
    /// Expected occupancy at hour-of-day `h`.
    pub fn occupancy(&self, h: f64) -> f64 {
        let z = (h - self.peak_hour) / self.sigma_hours;
        self.peak * (-0.5 * z * z).exp()
    }

    /// Tourist arrival rate per hour that keeps the expected occupancy on the
    /// bell curve under exponential stays.
    pub fn arrival_rate(&self, h: f64) -> f64 {
        let n = self.occupancy(h);
        let slope = -n * (h - self.peak_hour) / (self.sigma_hours * self.sigma_hours);
        (slope + n / self.mean_stay_hours).max(0.0)
    }
}

/// Hazards are per hour of hiking in benign weather. While the nearest
/// station reports any factor above level 1 they are multiplied by
/// `1 + severity_gain`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub seed: u64,
    pub duration: Timestamp,
    pub speedup: f64,
    pub tick: Timestamp,
    pub geo_interval: Timestamp,
    pub weather_interval: Timestamp,
    pub arrival: ArrivalParams,
    pub p_gps_consent: f64,
    pub p_gps_refused: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub p_trail_switch: f64,
    pub p_lost: f64,
    pub lost_offset_min: f64,
    pub lost_offset_max: f64,
    pub lost_dwell_minutes: f64,
    pub p_self_return: f64,
    pub rescue_minutes: f64,
    pub p_evacuate: f64,
    pub p_no_motion: f64,
    /// Shortest immobility; the rest is exponential with the same mean.
    pub no_motion_minutes: f64,
    pub severity_gain: f64,
    pub p_rest: f64,
    pub rest_minutes: f64,
    /// Fraction of tourists that hike in groups.
    pub group_fraction: f64,
    pub group_size_min: usize,
    pub group_size_max: usize,
    pub animal_count: usize,
    pub dangerous_fraction: f64,
    pub animal_speed_min: f64,
    pub animal_speed_max: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            seed: 1,
            duration: 3600,
            speedup: 25.0,
            tick: 10,
            geo_interval: 30,
            weather_interval: 60,
            arrival: ArrivalParams::default(),
            p_gps_consent: 0.38,
            p_gps_refused: 0.13,
            speed_min: 0.9,
            speed_max: 1.5,
            p_trail_switch: 0.3,
            p_lost: 0.01,
            lost_offset_min: 20.0,
            lost_offset_max: 150.0,
            lost_dwell_minutes: 20.0,
            p_self_return: 0.6,
            rescue_minutes: 30.0,
            p_evacuate: 0.3,
            p_no_motion: 0.01,
            no_motion_minutes: 25.0,
            severity_gain: 4.0,
            p_rest: 0.5,
            rest_minutes: 15.0,
            group_fraction: 0.3,
            group_size_min: 2,
            group_size_max: 5,
            animal_count: 8,
            dangerous_fraction: 0.67,
            animal_speed_min: 0.2,
            animal_speed_max: 1.0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidParams(m));
        let probs = [
            ("p_gps_consent", self.p_gps_consent),
            ("p_gps_refused", self.p_gps_refused),
            ("p_trail_switch", self.p_trail_switch),
            ("p_lost", self.p_lost),
            ("p_self_return", self.p_self_return),
            ("p_evacuate", self.p_evacuate),
            ("p_no_motion", self.p_no_motion),
            ("p_rest", self.p_rest),
            ("group_fraction", self.group_fraction),
            ("dangerous_fraction", self.dangerous_fraction),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        if self.p_gps_consent + self.p_gps_refused > 1.0 {
            return bad("phone mode probabilities exceed 1".into());
        }
        if self.tick == 0 || self.duration == 0 {
            return bad("tick and duration must be positive".into());
        }
        if !self.geo_interval.is_multiple_of(self.tick)
            || !self.weather_interval.is_multiple_of(self.tick)
        {
            return bad("reading intervals must be multiples of the tick".into());
        }
        if self.geo_interval == 0 || self.weather_interval == 0 {
            return bad("reading intervals must be positive".into());
        }
        if !(0.0 < self.speed_min && self.speed_min <= self.speed_max) {
            return bad("speed range must be positive and ordered".into());
        }
        if !(0.0 <= self.animal_speed_min && self.animal_speed_min <= self.animal_speed_max) {
            return bad("animal speed range must be ordered".into());
        }
        if !(2 <= self.group_size_min && self.group_size_min <= self.group_size_max) {
            return bad("group sizes must be ordered and at least 2".into());
        }
        if !(0.0 <= self.lost_offset_min && self.lost_offset_min <= self.lost_offset_max) {
            return bad("lost offset range must be ordered".into());
        }
        let a = &self.arrival;
        if a.peak < 0.0 || a.sigma_hours <= 0.0 || a.mean_stay_hours <= 0.0 {
            return bad("arrival parameters must be positive".into());
        }
        let means = [
            self.lost_dwell_minutes,
            self.rescue_minutes,
            self.no_motion_minutes,
            self.rest_minutes,
        ];
        if means.iter().any(|m| *m <= 0.0) || self.speedup <= 0.0 {
            return bad("durations and speedup must be positive".into());
        }
        Ok(())
    }

    fn mean_group_size(&self) -> f64 {
        (self.group_size_min + self.group_size_max) as f64 / 2.0
    }

    /// Probability that a party is a group, given the fraction of tourists in groups.
    fn party_group_probability(&self) -> f64 {
        let (f, m) = (self.group_fraction, self.mean_group_size());
        f / (m - f * (m - 1.0))
    }

    fn mean_party_size(&self) -> f64 {
        let q = self.party_group_probability();
        1.0 - q + q * self.mean_group_size()
    }
}

/// Scenario file contents: parameter defaults, exposure model and the five
/// weather scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioLibrary {
    #[serde(default)]
    pub params: SimParams,
    #[serde(default)]
    pub exposure: ExposureModel,
    #[serde(rename = "scenario")]
    pub scenarios: Vec<WeatherScenario>,
}

impl ScenarioLibrary {
    pub fn scenario(&self, id: u8) -> Result<&WeatherScenario, SimError> {
        self.scenarios
            .iter()
            .find(|s| s.id == id)
            .ok_or(SimError::UnknownScenario(id))
    }
}

pub fn load_scenarios(text: &str) -> Result<ScenarioLibrary, SimError> {
    let lib: ScenarioLibrary = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
    lib.params.validate()?;
    for s in &lib.scenarios {
        s.validate().map_err(SimError::InvalidScenario)?;
    }
    let mut ids: Vec<u8> = lib.scenarios.iter().map(|s| s.id).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(SimError::InvalidScenario("duplicate scenario id".into()));
    }
    Ok(lib)
}

pub fn default_scenarios() -> ScenarioLibrary {
    load_scenarios(DEFAULT_SCENARIOS).expect("embedded scenarios are valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SimEventKind {
    Arrival,
    Departure,
    Lost,
    Returned,
    Rescued,
    Evacuated,
    NoMotionStart,
    NoMotionEnd,
    RestStart,
    RestEnd,
    Detached,
    GroupFormed,
    WeatherSwitch,
}

/// Ground-truth record of something that happened in the simulated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub timestamp: Timestamp,
    pub kind: SimEventKind,
    pub entity: String,
    pub detail: String,
}

impl fmt::Display for SimEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{:?}\t{}\t{}",
            self.timestamp, self.kind, self.entity, self.detail
        )
    }
}

/// Append-only, time-ordered event log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimEventLog {
    events: Vec<SimEvent>,
}

impl SimEventLog {
    pub fn push(
        &mut self,
        timestamp: Timestamp,
        kind: SimEventKind,
        entity: String,
        detail: String,
    ) {
        debug_assert!(self.events.last().is_none_or(|e| e.timestamp <= timestamp));
        self.events.push(SimEvent {
            timestamp,
            kind,
            entity,
            detail,
        });
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn count(&self, kind: SimEventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

#[derive(Debug, Clone)]
struct Agent {
    tourist: Tourist,
    /// Seconds after entry when the tourist wants to be back at an exit.
    planned_stay: f64,
    returning: bool,
    /// Set while walking with the group leader.
    following: Option<TouristId>,
    /// End of the current lost / no-motion / rest episode.
    until: Timestamp,
    self_return: bool,
    awaiting_rescue: bool,
    last_rest: Option<(usize, usize)>,
}

/// Messages emitted by one step, all stamped with the step's timestamp.
pub type Emission = Vec<(Topic, Payload)>;

pub struct Simulator {
    area: Arc<AreaConfig>,
    params: SimParams,
    scenario: WeatherScenario,
    exposure: ExposureModel,
    graph: TrailGraph,
    exits: Vec<usize>,
    rng: ChaCha8Rng,
    now: Timestamp,
    next: Timestamp,
    agents: Vec<Agent>,
    animals: Vec<Animal>,
    groups: BTreeMap<GroupId, Group>,
    next_tourist: u32,
    next_group: u32,
    station_tags: Vec<WeatherTags>,
    segment: Option<usize>,
    log: SimEventLog,
    arrivals: u64,
    departures: u64,
}

impl Simulator {
    pub fn new(
        area: Arc<AreaConfig>,
        scenario: WeatherScenario,
        exposure: ExposureModel,
        params: SimParams,
    ) -> Result<Self, SimError> {
        params.validate()?;
        scenario.validate().map_err(SimError::InvalidScenario)?;
        let graph = TrailGraph::new(&area);
        let exits: Vec<usize> = (0..graph.nodes.len())
            .filter(|&n| graph.nodes[n].exit)
            .collect();
        if exits.is_empty() {
            return Err(SimError::InvalidParams("area has no entry points".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let animals = (0..params.animal_count)
            .map(|i| Animal {
                id: AnimalId(i as u32 + 1),
                location: GeoPoint::new(
                    rng.random_range(area.bounds.min.x..=area.bounds.max.x),
                    rng.random_range(area.bounds.min.y..=area.bounds.max.y),
                ),
                speed: rng.random_range(params.animal_speed_min..=params.animal_speed_max),
                heading: rng.random_range(0.0..std::f64::consts::TAU),
                dangerous: rng.random_bool(params.dangerous_fraction),
                gps_equipped: true,
            })
            .collect();
        let stations = area.weather_stations.len();
        Ok(Self {
            area,
            params,
            scenario,
            exposure,
            graph,
            exits,
            rng,
            now: 0,
            next: 0,
            agents: Vec::new(),
            animals,
            groups: BTreeMap::new(),
            next_tourist: 1,
            next_group: 1,
            station_tags: vec![WeatherTags::default(); stations],
            segment: None,
            log: SimEventLog::default(),
            arrivals: 0,
            departures: 0,
        })
    }

    pub fn area(&self) -> &Arc<AreaConfig> {
        &self.area
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn scenario(&self) -> &WeatherScenario {
        &self.scenario
    }

    /// Timestamp of the most recent step.
    pub fn now(&self) -> Timestamp {
        self.now
    }

    /// True once the step at `duration` has been taken.
    pub fn finished(&self) -> bool {
        self.next > self.params.duration
    }

    pub fn log(&self) -> &SimEventLog {
        &self.log
    }

    pub fn tourists(&self) -> impl Iterator<Item = &Tourist> {
        self.agents.iter().map(|a| &a.tourist)
    }

    pub fn animals(&self) -> &[Animal] {
        &self.animals
    }

    pub fn groups(&self) -> &BTreeMap<GroupId, Group> {
        &self.groups
    }

    pub fn population(&self) -> usize {
        self.agents.len()
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn departures(&self) -> u64 {
        self.departures
    }

    pub fn weather_at(&self, station: usize, t: Timestamp) -> WeatherReading {
        self.scenario.weather_at(
            &self.exposure,
            &self.area.weather_stations[station],
            t,
            self.params.duration,
            self.params.seed,
        )
    }

    fn hour_of_day(&self, t: Timestamp) -> f64 {
        self.area.schedule.time_of_day(t) as f64 / 3600.0
    }

    /// Advances the world by one tick (the first call only initializes it)
    /// and returns the messages produced at the new time.
    pub fn step(&mut self) -> Emission {
        let t = self.next;
        self.now = t;
        self.next += self.params.tick;
        let mut out = Vec::new();
        if t == 0 {
            out.push((
                Topic::Control,
                Payload::Control(Control::SetAvalanche {
                    level: self.scenario.avalanche,
                    operator: "duty-rescuer".into(),
                }),
            ));
        }
        if t.is_multiple_of(self.params.weather_interval) {
            self.emit_weather(t, &mut out);
        }
        if t == 0 {
            if self.params.arrival.warm_start {
                let n = self.poisson(self.params.arrival.occupancy(self.hour_of_day(0)));
                let mut spawned = 0;
                while spawned < n {
                    spawned += self.spawn_party(t, true, &mut out);
                }
            }
        } else {
            self.move_tourists(t);
            self.move_animals();
        }
        let rate = self.params.arrival.arrival_rate(self.hour_of_day(t)) / 3600.0;
        let parties = if t == 0 {
            0
        } else {
            self.poisson(rate * self.params.tick as f64 / self.params.mean_party_size())
        };
        for _ in 0..parties {
            self.spawn_party(t, false, &mut out);
        }
        if t.is_multiple_of(self.params.geo_interval) {
            self.emit_positions(&mut out);
        }
        out
    }

    fn poisson(&mut self, lambda: f64) -> usize {
        if lambda <= 0.0 {
            return 0;
        }
        Poisson::new(lambda).map_or(0, |p| p.sample(&mut self.rng) as usize)
    }

    fn exp_seconds(&mut self, mean_minutes: f64) -> Timestamp {
        let e = Exp::new(1.0 / (mean_minutes * 60.0)).expect("positive mean");
        e.sample(&mut self.rng).round() as Timestamp
    }

    fn emit_weather(&mut self, t: Timestamp, out: &mut Emission) {
        let f = t as f64 / self.params.duration as f64;
        let seg = self.scenario.segment_index(f);
        if self.segment.is_some_and(|s| s != seg) {
            self.log.push(
                t,
                SimEventKind::WeatherSwitch,
                format!("scenario{}", self.scenario.id),
                format!("segment {seg}"),
            );
        }
        self.segment = Some(seg);
        for i in 0..self.area.weather_stations.len() {
            let r = self.weather_at(i, t);
            if let Ok(tags) = a2_tag_weather(&r, &self.area.thresholds, self.scenario.season) {
                self.station_tags[i] = tags;
            }
            out.push((Topic::Weather, Payload::Weather(r)));
        }
    }

    /// Spawns one party and returns its size.
    fn spawn_party(&mut self, t: Timestamp, inside: bool, out: &mut Emission) -> usize {
        let p = &self.params;
        let size = if self
            .rng
            .random_bool(p.party_group_probability().clamp(0.0, 1.0))
        {
            self.rng.random_range(p.group_size_min..=p.group_size_max)
        } else {
            1
        };
        let (trail, s, direction) = if inside {
            self.random_trail_position()
        } else {
            let exit = self.exits[self.rng.random_range(0..self.exits.len())];
            let node = &self.graph.nodes[exit];
            let len = self.area.trail(node.trail).polyline.length();
            let dir = if node.arclength <= 0.0 {
                1.0
            } else if node.arclength >= len {
                -1.0
            } else if self.rng.random_bool(0.5) {
                1.0
            } else {
                -1.0
            };
            (node.trail, node.arclength, dir)
        };
        let speed = self
            .rng
            .random_range(self.params.speed_min..=self.params.speed_max);
        let stay_mean = self.params.arrival.mean_stay_hours * 3600.0;
        let planned_stay = Exp::new(1.0 / stay_mean)
            .expect("positive mean")
            .sample(&mut self.rng);
        let group = (size > 1).then(|| {
            let g = GroupId(self.next_group);
            self.next_group += 1;
            g
        });
        let mut members = Vec::with_capacity(size);
        for k in 0..size {
            let id = TouristId(self.next_tourist);
            self.next_tourist += 1;
            let u: f64 = self.rng.random();
            let phone_mode = if u < self.params.p_gps_consent {
                PhoneMode::GpsConsent
            } else if u < self.params.p_gps_consent + self.params.p_gps_refused {
                PhoneMode::GpsRefused
            } else {
                PhoneMode::BtsOnly
            };
            if phone_mode == PhoneMode::GpsRefused {
                out.push((Topic::Control, Payload::Control(Control::GpsDeclined(id))));
            }
            members.push(id);
            self.agents.push(Agent {
                tourist: Tourist {
                    id,
                    phone_mode,
                    group,
                    speed,
                    trail,
                    arclength: s,
                    direction,
                    state: TouristState::Hiking,
                    off_trail_position: None,
                    entered_at: t,
                    departed_at: None,
                },
                planned_stay,
                returning: false,
                following: (k > 0).then_some(members[0]),
                until: 0,
                self_return: false,
                awaiting_rescue: false,
                last_rest: None,
            });
            self.arrivals += 1;
            self.log.push(
                t,
                SimEventKind::Arrival,
                id.to_string(),
                format!("{} {:.0}", self.area.trail(trail).label, s),
            );
        }
        if let Some(gid) = group {
            let g = Group::new(gid, members).expect("distinct members");
            self.log.push(
                t,
                SimEventKind::GroupFormed,
                format!("G{}", gid.0),
                format!("{} members, leader {}", g.members.len(), g.leader),
            );
            out.push((
                Topic::Control,
                Payload::Control(Control::RegisterGroup(g.clone())),
            ));
            self.groups.insert(gid, g);
        }
        size
    }

    fn random_trail_position(&mut self) -> (TrailId, f64, f64) {
        let total: f64 = self.area.trails.iter().map(|t| t.polyline.length()).sum();
        let mut u = self.rng.random_range(0.0..total);
        for tr in &self.area.trails {
            let len = tr.polyline.length();
            if u < len {
                let dir = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
                return (tr.id, u, dir);
            }
            u -= len;
        }
        let last = self.area.trails.last().expect("area has trails");
        (last.id, last.polyline.length(), -1.0)
    }

    fn nearest_station(&self, p: GeoPoint) -> usize {
        self.area
            .weather_stations
            .iter()
            .enumerate()
            .min_by(|a, b| {
                a.1.location
                    .distance(&p)
                    .total_cmp(&b.1.location.distance(&p))
            })
            .map(|(i, _)| i)
            .expect("area has weather stations")
    }

    fn hazard(&self, per_hour: f64, severity: u8) -> f64 {
        let scale = if severity > 0 {
            1.0 + self.params.severity_gain
        } else {
            1.0
        };
        (per_hour * scale * self.params.tick as f64 / 3600.0).clamp(0.0, 1.0)
    }

    fn move_tourists(&mut self, t: Timestamp) {
        let dt = self.params.tick as f64;
        let mut departed: Vec<usize> = Vec::new();
        for i in 0..self.agents.len() {
            if self.agents[i].following.is_some() {
                continue;
            }
            if self.advance_independent(i, t, dt) {
                departed.push(i);
            }
        }
        // Followers mirror their leader; a departed or evacuated leader takes
        // the attached group out too.
        let positions: BTreeMap<TouristId, (Tourist, bool)> = self
            .agents
            .iter()
            .enumerate()
            .filter(|(_, a)| a.following.is_none())
            .map(|(i, a)| (a.tourist.id, (a.tourist.clone(), departed.contains(&i))))
            .collect();
        for i in 0..self.agents.len() {
            let Some(leader) = self.agents[i].following else {
                continue;
            };
            let Some((lt, gone)) = positions.get(&leader) else {
                self.agents[i].following = None;
                self.agents[i].returning = true;
                continue;
            };
            if *gone && lt.state != TouristState::Evacuating {
                departed.push(i);
                continue;
            }
            if *gone {
                // Leader evacuated; the rest walk out on their own.
                self.agents[i].following = None;
                self.agents[i].returning = true;
                self.log.push(
                    t,
                    SimEventKind::Detached,
                    self.agents[i].tourist.id.to_string(),
                    "leader evacuated".into(),
                );
                continue;
            }
            let a = &mut self.agents[i].tourist;
            a.trail = lt.trail;
            a.arclength = lt.arclength;
            a.direction = lt.direction;
            a.off_trail_position = lt.off_trail_position;
            if self.sample_incident(i, t) {
                self.agents[i].following = None;
                self.log.push(
                    t,
                    SimEventKind::Detached,
                    self.agents[i].tourist.id.to_string(),
                    format!("from {leader}"),
                );
            }
        }
        departed.sort_unstable();
        departed.dedup();
        for &i in departed.iter().rev() {
            let mut a = self.agents.remove(i);
            a.tourist.departed_at = Some(t);
            self.departures += 1;
            let kind = if a.tourist.state == TouristState::Evacuating {
                SimEventKind::Evacuated
            } else {
                SimEventKind::Departure
            };
            self.log
                .push(t, kind, a.tourist.id.to_string(), String::new());
        }
    }

    /// Runs one tick for a tourist not attached to a leader. Returns true
    /// when the tourist leaves the area.
    fn advance_independent(&mut self, i: usize, t: Timestamp, dt: f64) -> bool {
        let id = self.agents[i].tourist.id;
        match self.agents[i].tourist.state {
            TouristState::Lost => {
                if t < self.agents[i].until {
                    return false;
                }
                let a = &mut self.agents[i];
                if a.self_return {
                    a.tourist.state = TouristState::Hiking;
                    a.tourist.off_trail_position = None;
                    self.log
                        .push(t, SimEventKind::Returned, id.to_string(), String::new());
                } else if !a.awaiting_rescue {
                    a.awaiting_rescue = true;
                    let wait = self.exp_seconds(self.params.rescue_minutes);
                    self.agents[i].until = t + wait.max(self.params.tick);
                } else if self.rng.random_bool(self.params.p_evacuate) {
                    self.agents[i].tourist.state = TouristState::Evacuating;
                    return true;
                } else {
                    let a = &mut self.agents[i];
                    a.tourist.state = TouristState::Rescued;
                    a.tourist.off_trail_position = None;
                    a.awaiting_rescue = false;
                    a.returning = true;
                    self.log
                        .push(t, SimEventKind::Rescued, id.to_string(), String::new());
                }
                return false;
            }
            TouristState::NoMotion => {
                if t >= self.agents[i].until {
                    self.agents[i].tourist.state = TouristState::Hiking;
                    self.log
                        .push(t, SimEventKind::NoMotionEnd, id.to_string(), String::new());
                }
                return false;
            }
            TouristState::Resting => {
                if t >= self.agents[i].until {
                    self.agents[i].tourist.state = TouristState::Hiking;
                    self.log
                        .push(t, SimEventKind::RestEnd, id.to_string(), String::new());
                }
                return false;
            }
            TouristState::Hiking | TouristState::Rescued => {}
            TouristState::Evacuating | TouristState::Departed => return true,
        }
        if !self.agents[i].returning {
            let a = &self.agents[i];
            let (exit_dist, dir) = self.graph.exit_route(a.tourist.trail, a.tourist.arclength);
            let elapsed = (t - a.tourist.entered_at) as f64;
            if elapsed + exit_dist / a.tourist.speed >= a.planned_stay {
                let a = &mut self.agents[i];
                a.returning = true;
                a.tourist.direction = dir;
            }
        }
        let speed = self.agents[i].tourist.speed;
        if self.walk(i, speed * dt) {
            return true;
        }
        if self.agents[i].tourist.state == TouristState::Hiking {
            self.maybe_rest(i, t);
            if self.agents[i].tourist.state == TouristState::Hiking {
                self.sample_incident(i, t);
            }
        }
        false
    }

    /// Samples lost / no-motion onsets. Returns true if one started.
    fn sample_incident(&mut self, i: usize, t: Timestamp) -> bool {
        if self.agents[i].tourist.state != TouristState::Hiking {
            return false;
        }
        let pos = self.agents[i].tourist.position(&self.area);
        if self.area.in_special_place(pos) {
            return false;
        }
        let severity = self.station_tags[self.nearest_station(pos)].severity();
        let id = self.agents[i].tourist.id;
        if self
            .rng
            .random_bool(self.hazard(self.params.p_lost, severity))
        {
            let tr = self.area.trail(self.agents[i].tourist.trail);
            let (tx, ty) = tr.polyline.tangent_at(self.agents[i].tourist.arclength);
            let offset = self
                .rng
                .random_range(self.params.lost_offset_min..=self.params.lost_offset_max);
            let side = if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let p = self.area.bounds.clamp(GeoPoint::new(
                pos.x - side * ty * offset,
                pos.y + side * tx * offset,
            ));
            let dwell = self
                .exp_seconds(self.params.lost_dwell_minutes)
                .max(self.params.tick);
            let self_return = self.rng.random_bool(self.params.p_self_return);
            let a = &mut self.agents[i];
            a.tourist.state = TouristState::Lost;
            a.tourist.off_trail_position = Some(p);
            a.until = t + dwell;
            a.self_return = self_return;
            a.awaiting_rescue = false;
            self.log.push(
                t,
                SimEventKind::Lost,
                id.to_string(),
                format!("offset {offset:.0} m"),
            );
            return true;
        }
        if self
            .rng
            .random_bool(self.hazard(self.params.p_no_motion, severity))
        {
            let extra = self.params.no_motion_minutes as Timestamp * 60
                + self.exp_seconds(self.params.no_motion_minutes);
            let a = &mut self.agents[i];
            a.tourist.state = TouristState::NoMotion;
            a.until = t + extra;
            self.log.push(
                t,
                SimEventKind::NoMotionStart,
                id.to_string(),
                format!("{extra} s"),
            );
            return true;
        }
        false
    }

    fn maybe_rest(&mut self, i: usize, t: Timestamp) {
        let pos = self.agents[i].tourist.position(&self.area);
        let place = self.area.trails.iter().enumerate().find_map(|(ti, tr)| {
            tr.special_places
                .iter()
                .position(|sp| sp.contains(pos))
                .map(|pi| (ti, pi))
        });
        let Some(place) = place else {
            return;
        };
        if self.agents[i].last_rest == Some(place) {
            return;
        }
        self.agents[i].last_rest = Some(place);
        if self.rng.random_bool(self.params.p_rest) {
            let d = self
                .exp_seconds(self.params.rest_minutes)
                .max(self.params.tick);
            let a = &mut self.agents[i];
            a.tourist.state = TouristState::Resting;
            a.until = t + d;
            self.log.push(
                t,
                SimEventKind::RestStart,
                a.tourist.id.to_string(),
                format!("{d} s"),
            );
        }
    }

    /// Moves a tourist `dist` meters along the network, deciding at key
    /// points. Returns true when the tourist walks out through an exit.
    fn walk(&mut self, i: usize, dist: f64) -> bool {
        let mut remaining = dist;
        for _ in 0..64 {
            let a = &self.agents[i];
            let (trail, s, dir) = (a.tourist.trail, a.tourist.arclength, a.tourist.direction);
            if a.returning {
                if let Some(n) = self.graph.node_at(trail, s) {
                    if self.graph.nodes[n].exit {
                        return true;
                    }
                }
            }
            let Some(n) = self.graph.next_key(trail, s, dir) else {
                self.agents[i].tourist.direction = -dir;
                continue;
            };
            let gap = (self.graph.nodes[n].arclength - s).abs();
            if remaining < gap {
                self.agents[i].tourist.arclength = s + dir * remaining;
                return false;
            }
            remaining -= gap;
            self.agents[i].tourist.arclength = self.graph.nodes[n].arclength;
            if self.agents[i].returning {
                if self.graph.nodes[n].exit {
                    return true;
                }
                let (nt, ns, nd) = self.graph.exit_continuation(n);
                let tt = &mut self.agents[i].tourist;
                tt.trail = nt;
                tt.arclength = ns;
                tt.direction = nd;
            } else {
                self.choose_outbound(i, n);
            }
            if remaining <= 0.0 {
                return false;
            }
        }
        false
    }

    fn choose_outbound(&mut self, i: usize, n: usize) {
        let dir = self.agents[i].tourist.direction;
        let node = &self.graph.nodes[n];
        let straight = self
            .graph
            .next_key(node.trail, node.arclength, dir)
            .is_some();
        let mut branches: Vec<(TrailId, f64, f64)> = Vec::new();
        for &m in &node.siblings {
            let sib = &self.graph.nodes[m];
            for d in [1.0, -1.0] {
                if self.graph.next_key(sib.trail, sib.arclength, d).is_some() {
                    branches.push((sib.trail, sib.arclength, d));
                }
            }
        }
        let switch =
            !branches.is_empty() && (!straight || self.rng.random_bool(self.params.p_trail_switch));
        let tt = &mut self.agents[i].tourist;
        if switch {
            let (bt, bs, bd) = branches[self.rng.random_range(0..branches.len())];
            tt.trail = bt;
            tt.arclength = bs;
            tt.direction = bd;
        } else if !straight {
            tt.direction = -dir;
        }
    }

    fn move_animals(&mut self) {
        let dt = self.params.tick as f64;
        let b = self.area.bounds;
        for a in &mut self.animals {
            let turn: f64 = self.rng.sample(StandardNormal);
            a.heading += 0.4 * turn;
            let mut x = a.location.x + a.speed * dt * a.heading.cos();
            let mut y = a.location.y + a.speed * dt * a.heading.sin();
            if x < b.min.x || x > b.max.x {
                a.heading = std::f64::consts::PI - a.heading;
                x = x.clamp(b.min.x, b.max.x);
            }
            if y < b.min.y || y > b.max.y {
                a.heading = -a.heading;
                y = y.clamp(b.min.y, b.max.y);
            }
            a.location = GeoPoint::new(x, y);
        }
    }

    fn emit_positions(&mut self, out: &mut Emission) {
        for i in 0..self.agents.len() {
            let p = self.agents[i].tourist.position(&self.area);
            let id = self.agents[i].tourist.id;
            for st in &self.area.bts_stations {
                let d = st.location.distance(&p);
                if d <= st.max_range {
                    let z: f64 = self.rng.sample(StandardNormal);
                    out.push((
                        Topic::BtsMeasurement,
                        Payload::Bts(BtsSignal {
                            station: st.id,
                            phone: id,
                            rssi: st.rssi_at(d) + st.noise_sigma * z,
                        }),
                    ));
                }
            }
            if self.agents[i].tourist.phone_mode == PhoneMode::GpsConsent {
                out.push((
                    Topic::GpsTourist,
                    Payload::GpsTourist(TouristFix {
                        tourist: id,
                        point: p,
                    }),
                ));
            }
        }
        for a in &self.animals {
            if a.gps_equipped {
                out.push((
                    Topic::GpsAnimal,
                    Payload::GpsAnimal(AnimalFix {
                        animal: a.id,
                        point: a.location,
                        dangerous: a.dangerous,
                    }),
                ));
            }
        }
    }
}
