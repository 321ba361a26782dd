//! The context processing loop: drain raw messages, fuse and tag them,
//! store rows, snapshot, reason and disseminate verdicts.

use super::{Reasoner, SolverStats, ThreatVerdict};
use crate::broker::{
    Broker, BrokerError, Control, Message, Payload, Subscription, Topic, DEFAULT_CAPACITY,
};
use crate::context::{DayNight, Difficulty, Situational, TouristId, WeatherTags};
use crate::geo::GeoPoint;
use crate::preprocess::{
    a1_geolocate, a2_tag_weather, assign_route, select_station, BtsObservation, DepartureKind,
    FixSource, GeoFix, GroupAnchor, PresenceEvent, PresenceTracker,
};
use crate::repository::{AlertLibrary, ContextRow, Repository, Snapshot};
use crate::threatlang::{verdict_tokens, BehaviorPoint};
use crate::world::{
    AnimalId, AreaConfig, BtsStationId, Group, GroupId, Timestamp, TrailId, WeatherStationId,
};
use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Simulated seconds between reasoning cycles.
    pub cycle_period: Timestamp,
    pub record_traces: bool,
    pub record_journal: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cycle_period: 30,
            record_traces: true,
            record_journal: true,
        }
    }
}

/// Cumulative counters since the start of the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PipelineCounters {
    pub cycles: u64,
    pub verdicts: u64,
    pub arrivals: u64,
    pub clean_departures: u64,
    pub lost_signal_departures: u64,
    /// Weather verdicts by level, E1..E5.
    pub weather: [u64; 5],
    /// Situational threats, E6g, E6a, E6m, E6r.
    pub situational: [u64; 4],
    /// Weather threats (E2..E5) per trail label.
    pub weather_by_route: BTreeMap<String, [u64; 4]>,
    pub low_accuracy: u64,
    pub unlocatable: u64,
    pub dropped_messages: u64,
    /// Station-selection events by in-range station count: 0, 1, 2, 3+.
    pub proximity: [u64; 4],
    pub group_improved: u64,
    pub alert_swaps: u64,
}

impl PipelineCounters {
    pub fn weather_threats(&self) -> u64 {
        self.weather[1..].iter().sum()
    }

    pub fn departures(&self) -> u64 {
        self.clean_departures + self.lost_signal_departures
    }

    pub fn situational_count(&self, s: Situational) -> u64 {
        let i = Situational::ALL
            .iter()
            .position(|x| *x == s)
            .expect("known label");
        self.situational[i]
    }
}

/// Per-tourist transition tally for a finished stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StayRecord {
    pub tourist: TouristId,
    pub cycles: u32,
    pub transitions: u32,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PopulationCounts {
    pub total: u64,
    pub left: u64,
    pub current: u64,
    pub gps_located: u64,
    pub bts_located: u64,
    /// Present tourists who declined GPS tracking.
    pub refused: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GroupCounts {
    pub groups: u64,
    pub average_size: f64,
    pub gps_members: u64,
    pub bts_members: u64,
    pub improved: u64,
}

type Signature = (WeatherTags, TrailId, Difficulty, DayNight);

#[derive(Debug, Clone)]
struct Track {
    trail: TrailId,
    arclength: f64,
    direction: f64,
    anchor: GeoPoint,
    idle: u64,
    last_time: Timestamp,
    station: Option<WeatherStationId>,
    signature: Option<Signature>,
    cycles: u32,
    transitions: u32,
}

/// Subscriptions to every topic, read one watermark-delimited cycle at a time.
///
/// Topics are drained in a fixed order, so the queue capacity must exceed the
/// number of messages any single topic carries in one cycle.
pub struct Inlet {
    subs: Vec<Subscription>,
}

impl Inlet {
    pub fn new(broker: &Broker) -> Result<Self, BrokerError> {
        Self::with_capacity(broker, DEFAULT_CAPACITY)
    }

    pub fn with_capacity(broker: &Broker, capacity: usize) -> Result<Self, BrokerError> {
        let subs = Topic::ALL
            .iter()
            .map(|t| broker.subscribe(*t, capacity))
            .collect::<Result<_, _>>()?;
        Ok(Self { subs })
    }

    /// Blocks until every topic has delivered its next watermark. Returns the
    /// watermark time and the messages before it, or `None` once the broker
    /// is closed and drained.
    pub fn next_cycle(&self) -> Option<(Timestamp, Vec<Message>)> {
        let mut out = Vec::new();
        let mut mark = None;
        for sub in &self.subs {
            loop {
                let m = sub.recv()?;
                if m.payload == Payload::Watermark {
                    mark = Some(mark.map_or(m.timestamp, |t: Timestamp| t.max(m.timestamp)));
                    break;
                }
                out.push(m);
            }
        }
        mark.map(|t| (t, out))
    }
}

pub struct Pipeline {
    area: Arc<AreaConfig>,
    config: PipelineConfig,
    repo: Repository,
    reasoner: Reasoner,
    presence: PresenceTracker,
    station_tags: Vec<Option<WeatherTags>>,
    tracks: BTreeMap<TouristId, Track>,
    groups: BTreeMap<GroupId, Group>,
    member_of: BTreeMap<TouristId, GroupId>,
    declined: BTreeSet<TouristId>,
    animals: BTreeMap<AnimalId, (GeoPoint, bool)>,
    pending_bts: BTreeMap<TouristId, BTreeMap<BtsStationId, f64>>,
    pending_gps: BTreeMap<TouristId, GeoPoint>,
    counters: PipelineCounters,
    stays: Vec<StayRecord>,
    traces: BTreeMap<TouristId, Vec<BehaviorPoint>>,
    journal: String,
    listeners: Vec<Sender<ThreatVerdict>>,
    last_verdicts: Vec<ThreatVerdict>,
}

impl Pipeline {
    pub fn new(area: Arc<AreaConfig>, alerts: AlertLibrary, config: PipelineConfig) -> Self {
        let difficulties = area.trails.iter().map(|t| t.difficulty).collect();
        let stations = area.weather_stations.len();
        Self {
            repo: Repository::new(difficulties, alerts),
            area,
            config,
            reasoner: Reasoner::new(),
            presence: PresenceTracker::new(),
            station_tags: vec![None; stations],
            tracks: BTreeMap::new(),
            groups: BTreeMap::new(),
            member_of: BTreeMap::new(),
            declined: BTreeSet::new(),
            animals: BTreeMap::new(),
            pending_bts: BTreeMap::new(),
            pending_gps: BTreeMap::new(),
            counters: PipelineCounters::default(),
            stays: Vec::new(),
            traces: BTreeMap::new(),
            journal: String::new(),
            listeners: Vec::new(),
            last_verdicts: Vec::new(),
        }
    }

    pub fn area(&self) -> &Arc<AreaConfig> {
        &self.area
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn repository(&self) -> &Repository {
        &self.repo
    }

    pub fn counters(&self) -> &PipelineCounters {
        &self.counters
    }

    pub fn solver_stats(&self) -> &SolverStats {
        &self.reasoner.stats
    }

    pub fn stays(&self) -> &[StayRecord] {
        &self.stays
    }

    pub fn traces(&self) -> &BTreeMap<TouristId, Vec<BehaviorPoint>> {
        &self.traces
    }

    pub fn journal(&self) -> &str {
        &self.journal
    }

    /// Last reported position and danger flag of each tracked animal.
    pub fn animals(&self) -> &BTreeMap<AnimalId, (GeoPoint, bool)> {
        &self.animals
    }

    pub fn last_verdicts(&self) -> &[ThreatVerdict] {
        &self.last_verdicts
    }

    pub fn snapshot(&self) -> Snapshot {
        self.repo.snapshot()
    }

    /// Verdicts of every later cycle, in tourist-id order within a cycle.
    pub fn subscribe_verdicts(&mut self) -> Receiver<ThreatVerdict> {
        let (tx, rx) = unbounded();
        self.listeners.push(tx);
        rx
    }

    pub fn population(&self) -> PopulationCounts {
        let snap = self.repo.snapshot();
        let gps = snap.rows.values().filter(|r| r.fix.source.is_gps()).count() as u64;
        let current = self.presence.len() as u64;
        PopulationCounts {
            total: self.counters.arrivals,
            left: self.counters.departures(),
            current,
            gps_located: gps,
            bts_located: snap.rows.len() as u64 - gps,
            refused: self
                .presence
                .present()
                .filter(|id| self.declined.contains(id))
                .count() as u64,
        }
    }

    pub fn group_counts(&self) -> GroupCounts {
        let snap = self.repo.snapshot();
        let mut out = GroupCounts {
            improved: self.counters.group_improved,
            ..Default::default()
        };
        let mut members = 0u64;
        for g in self.groups.values() {
            let present: Vec<_> = g.members.iter().filter_map(|m| snap.rows.get(m)).collect();
            if present.is_empty() {
                continue;
            }
            out.groups += 1;
            members += present.len() as u64;
            for r in present {
                if r.fix.source.is_gps() {
                    out.gps_members += 1;
                } else {
                    out.bts_members += 1;
                }
            }
        }
        if out.groups > 0 {
            out.average_size = members as f64 / out.groups as f64;
        }
        out
    }

    /// Reads cycles from the inlet until the broker closes.
    pub fn run(&mut self, inlet: &Inlet) {
        while let Some((t, messages)) = inlet.next_cycle() {
            self.process_cycle(t, messages);
        }
    }

    /// One full pass of the loop for the cycle ending at `t`.
    pub fn process_cycle(&mut self, t: Timestamp, messages: Vec<Message>) -> Vec<ThreatVerdict> {
        let cycle = self.counters.cycles;
        self.counters.cycles += 1;
        for m in messages {
            self.dispatch(t, m);
        }
        let fixes = self.geolocate(t);
        self.update_rows(t, &fixes);
        for ev in self.presence.sweep(&self.area, t) {
            self.handle_departure(ev);
        }
        let snapshot = self.repo.snapshot();
        let verdicts: Vec<ThreatVerdict> = snapshot
            .rows
            .values()
            .map(|row| {
                self.reasoner
                    .evaluate(row, &snapshot.alerts, &self.area.detectors, cycle, t)
            })
            .collect();
        for v in &verdicts {
            self.record_verdict(v, &snapshot, t);
        }
        self.listeners
            .retain(|tx| verdicts.iter().all(|v| tx.send(v.clone()).is_ok()));
        self.last_verdicts = verdicts.clone();
        verdicts
    }

    fn log(&mut self, line: std::fmt::Arguments<'_>) {
        if self.config.record_journal {
            self.journal.write_fmt(line).expect("string write");
            self.journal.push('\n');
        }
    }

    fn dispatch(&mut self, t: Timestamp, m: Message) {
        match m.payload {
            Payload::Weather(r) => {
                let idx = r.station.0 as usize;
                match a2_tag_weather(&r, &self.area.thresholds, self.area.season) {
                    Ok(tags) if idx < self.station_tags.len() => {
                        self.station_tags[idx] = Some(tags)
                    }
                    _ => self.drop_message(t, "weather"),
                }
            }
            Payload::Bts(b) => {
                if b.rssi.is_finite() && (b.station.0 as usize) < self.area.bts_stations.len() {
                    self.pending_bts
                        .entry(b.phone)
                        .or_default()
                        .insert(b.station, b.rssi);
                } else {
                    self.drop_message(t, "bts");
                }
            }
            Payload::GpsTourist(f) => {
                if f.point.is_finite() {
                    self.pending_gps.insert(f.tourist, f.point);
                } else {
                    self.drop_message(t, "gps");
                }
            }
            Payload::GpsAnimal(a) => {
                if a.point.is_finite() {
                    self.animals.insert(a.animal, (a.point, a.dangerous));
                } else {
                    self.drop_message(t, "animal");
                }
            }
            Payload::Control(c) => self.control(t, c),
            Payload::Watermark => {}
        }
    }

    fn drop_message(&mut self, t: Timestamp, kind: &str) {
        self.counters.dropped_messages += 1;
        self.log(format_args!("X\t{t}\t{kind}"));
    }

    fn control(&mut self, t: Timestamp, c: Control) {
        match c {
            Control::RegisterGroup(g) => {
                for m in &g.members {
                    self.member_of.insert(*m, g.id);
                }
                self.log(format_args!(
                    "G\t{t}\tG{}\t{}\t{}",
                    g.id.0,
                    g.leader,
                    g.members.len()
                ));
                self.groups.insert(g.id, g);
            }
            Control::GpsDeclined(id) => {
                self.declined.insert(id);
            }
            Control::SetAvalanche { level, operator } => {
                self.repo.set_avalanche(level, &operator, t);
                self.log(format_args!("K\t{t}\tA{}\t{operator}", level.get()));
            }
            Control::SwapAlertSet(name) => match self.repo.swap_alert_set(&name) {
                Ok(prev) => {
                    self.counters.alert_swaps += 1;
                    self.log(format_args!("S\t{t}\t{prev}\t{name}"));
                }
                Err(_) => self.drop_message(t, "alert-set"),
            },
        }
    }

    /// Fuses this cycle's GPS and BTS data into one fix per located tourist.
    fn geolocate(&mut self, t: Timestamp) -> BTreeMap<TouristId, GeoFix> {
        let bts = std::mem::take(&mut self.pending_bts);
        let gps = std::mem::take(&mut self.pending_gps);
        let ids: BTreeSet<TouristId> = bts.keys().chain(gps.keys()).copied().collect();
        let threshold = self.area.thresholds.off_trail;
        let anchors_of = |id: TouristId| -> Vec<GroupAnchor> {
            let Some(g) = self.member_of.get(&id).and_then(|g| self.groups.get(g)) else {
                return Vec::new();
            };
            g.members
                .iter()
                .filter(|m| **m != id)
                .filter_map(|m| gps.get(m).map(|p| (m, *p)))
                .map(|(m, point)| GroupAnchor {
                    point,
                    trail: assign_route(
                        &self.area,
                        point,
                        self.tracks.get(m).map(|k| k.trail),
                        threshold,
                    )
                    .trail,
                })
                .collect()
        };
        let mut fixes = BTreeMap::new();
        let mut events = Vec::new();
        for id in ids {
            if self.repo.is_departed(id) {
                continue;
            }
            let obs: Vec<BtsObservation> = bts
                .get(&id)
                .map(|m| {
                    m.iter()
                        .map(|(station, rssi)| BtsObservation {
                            station: *station,
                            rssi: *rssi,
                        })
                        .collect()
                })
                .unwrap_or_default();
            let previous = self.repo.row(id).map(|r| r.fix.point);
            match a1_geolocate(
                &self.area,
                id,
                t,
                &obs,
                gps.get(&id).copied(),
                &anchors_of(id),
                previous,
            ) {
                Ok(g) => {
                    if let Some(ev) = g.low_accuracy {
                        events.push(ev);
                    }
                    fixes.insert(id, g.fix);
                }
                Err(_) => self.counters.unlocatable += 1,
            }
        }
        for ev in events {
            self.counters.low_accuracy += 1;
            self.log(format_args!(
                "L\t{t}\t{}\tB{}\t{:.1}",
                ev.tourist,
                ev.station.0 + 1,
                ev.mismatch
            ));
        }
        fixes
    }

    fn update_rows(&mut self, t: Timestamp, fixes: &BTreeMap<TouristId, GeoFix>) {
        let th = self.area.thresholds.clone();
        let area = self.area.clone();
        let dangerous: Vec<GeoPoint> = self
            .animals
            .values()
            .filter(|(_, d)| *d)
            .map(|(p, _)| *p)
            .collect();
        for (id, fix) in fixes {
            if let Some(PresenceEvent::Arrival { tourist, at }) = self.presence.observe(&area, fix)
            {
                self.counters.arrivals += 1;
                self.log(format_args!("A\t{at}\t{tourist}"));
            }
            if !self.presence.is_present(*id) {
                continue;
            }
            if fix.source == FixSource::GroupImproved {
                self.counters.group_improved += 1;
                self.log(format_args!("I\t{t}\t{id}"));
            }
            // Coarser fixes get a proportionally wider corridor and motion radius.
            let margin = (fix.accuracy - th.gps_accuracy).max(0.0);
            let track = self.tracks.get(id);
            let route = assign_route(
                &area,
                fix.point,
                track.map(|k| k.trail),
                th.off_trail + margin,
            );
            let direction = match track {
                Some(k)
                    if k.trail == route.trail && (route.arclength - k.arclength).abs() > 1.0 =>
                {
                    (route.arclength - k.arclength).signum()
                }
                Some(k) => k.direction,
                None => 1.0,
            };
            let choice = select_station(&area, fix.point, route.trail, route.arclength, direction);
            let (anchor, idle) = match track {
                Some(k) if k.anchor.distance(&fix.point) <= th.motion_radius + margin => {
                    (k.anchor, k.idle + t.saturating_sub(k.last_time))
                }
                _ => (fix.point, 0),
            };
            if track.and_then(|k| k.station) != Some(choice.station) {
                self.counters.proximity[choice.in_range.min(3)] += 1;
                self.log(format_args!(
                    "P\t{t}\t{id}\tWS{}\t{}",
                    choice.station.0 + 1,
                    choice.in_range
                ));
            }
            let group = self.member_of.get(id).copied();
            let leader_distance = group
                .and_then(|g| self.groups.get(&g))
                .filter(|g| g.leader != *id)
                .and_then(|g| {
                    fixes
                        .get(&g.leader)
                        .map(|f| f.point)
                        .or_else(|| self.repo.row(g.leader).map(|r| r.fix.point))
                })
                .map(|p| p.distance(&fix.point));
            let nearest_dangerous_animal = dangerous
                .iter()
                .map(|p| p.distance(&fix.point))
                .min_by(f64::total_cmp);
            let row = ContextRow {
                tourist: *id,
                fix: *fix,
                trail: route.trail,
                arclength: route.arclength,
                difficulty: area.difficulty(route.trail),
                tags: self.station_tags[choice.station.0 as usize].unwrap_or_default(),
                station: choice.station,
                day_night: area.day_night(t),
                season: area.season,
                avalanche: self.repo.avalanche().level,
                motion_idle_seconds: idle,
                off_trail: route.off_trail,
                in_special_place: area.in_special_place(fix.point),
                group,
                leader_distance,
                nearest_dangerous_animal,
                updated_at: t,
            };
            let signature = (row.tags, row.trail, row.difficulty, row.day_night);
            if self.repo.upsert_row(row).is_err() {
                self.counters.dropped_messages += 1;
                continue;
            }
            let k = self.tracks.entry(*id).or_insert(Track {
                trail: route.trail,
                arclength: route.arclength,
                direction,
                anchor,
                idle,
                last_time: t,
                station: None,
                signature: None,
                cycles: 0,
                transitions: 0,
            });
            if k.signature.is_some_and(|s| s != signature) {
                k.transitions += 1;
            }
            k.signature = Some(signature);
            k.cycles += 1;
            k.trail = route.trail;
            k.arclength = route.arclength;
            k.direction = direction;
            k.anchor = anchor;
            k.idle = idle;
            k.last_time = t;
            k.station = Some(choice.station);
        }
    }

    fn handle_departure(&mut self, ev: PresenceEvent) {
        let PresenceEvent::Departure { tourist, at, kind } = ev else {
            return;
        };
        let label = match kind {
            DepartureKind::Clean => {
                self.counters.clean_departures += 1;
                "clean"
            }
            DepartureKind::LostSignal => {
                self.counters.lost_signal_departures += 1;
                "lost-signal"
            }
        };
        self.repo.depart(tourist);
        if let Some(k) = self.tracks.remove(&tourist) {
            self.stays.push(StayRecord {
                tourist,
                cycles: k.cycles,
                transitions: k.transitions,
            });
        }
        self.log(format_args!("D\t{at}\t{tourist}\t{label}"));
    }

    fn record_verdict(&mut self, v: &ThreatVerdict, snapshot: &Snapshot, t: Timestamp) {
        let row = &snapshot.rows[&v.tourist];
        let trail = &self.area.trail(row.trail).label;
        self.counters.verdicts += 1;
        self.counters.weather[v.weather.index()] += 1;
        if v.weather.is_threat() {
            self.counters
                .weather_by_route
                .entry(trail.clone())
                .or_default()[v.weather.index() - 1] += 1;
        }
        for (i, s) in Situational::ALL.iter().enumerate() {
            if v.situational.contains(*s) {
                self.counters.situational[i] += 1;
            }
        }
        let ll = self.area.frame.to_latlon(row.fix.point);
        let located = row.updated_at == t;
        if self.config.record_journal {
            let _ = writeln!(
                self.journal,
                "V\t{}\t{t}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}",
                v.cycle,
                v.tourist,
                v.weather.label(),
                v.situational,
                ll.lat,
                ll.lon,
                trail,
                row.difficulty.label(),
                row.fix.source.label(),
                if located { "fresh" } else { "stale" },
            );
        }
        if self.config.record_traces && located {
            self.traces
                .entry(v.tourist)
                .or_default()
                .push(BehaviorPoint {
                    tourist: v.tourist,
                    th: verdict_tokens(v),
                    geo: ll,
                    ts: self.area.schedule.datetime(t),
                    trail: trail.clone(),
                    difficulty: row.difficulty,
                });
        }
    }
}
