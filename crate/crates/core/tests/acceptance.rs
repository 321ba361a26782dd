//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails the
//! target if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;
use std::time::Instant;
use summit::analytics::{pearson, stays_without_cycles};
use summit::broker::{Message, Payload, Topic, TouristFix, WeatherReading};
use summit::context::{
    AvalancheLevel, DayNight, Difficulty, Season, TagLevel, TouristId, WeatherFactor, WeatherLevel,
    WeatherTags,
};
use summit::geo::GeoPoint;
use summit::preprocess::{a1_geolocate, BtsObservation, FixSource, GeoFix};
use summit::reasoning::{solve, Cnf, Pipeline, PipelineConfig, Reasoner, SatResult};
use summit::repository::{default_alert_sets, ContextRow};
use summit::runner::{run, RunConfig, RunOutput};
use summit::simulator::{default_scenarios, run_preliminary, PreliminaryParams};
use summit::threatlang::{
    accepts, compile, threat_acceptor, threat_language, trace_tokens, Dfa, Token,
};
use summit::world::{default_area, AreaConfig, Timestamp, TrailId, WeatherStationId};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------- SAT

fn random_cnf(rng: &mut ChaCha8Rng) -> Cnf {
    let vars = rng.random_range(1..=12usize);
    let clauses = rng.random_range(0..=40usize);
    let mut cnf = Cnf::new(vars);
    for _ in 0..clauses {
        let width = rng.random_range(1..=4usize);
        let clause = (0..width)
            .map(|_| {
                let v = rng.random_range(1..=vars as i32);
                if rng.random_bool(0.5) {
                    v
                } else {
                    -v
                }
            })
            .collect();
        cnf.add_clause(clause).unwrap();
    }
    cnf
}

fn truth_table_sat(cnf: &Cnf) -> bool {
    let n = cnf.num_vars();
    (0u32..1 << n).any(|bits| {
        cnf.clauses().iter().all(|c| {
            c.iter().any(|&l| {
                let value = bits >> (l.unsigned_abs() - 1) & 1 == 1;
                value == (l > 0)
            })
        })
    })
}

fn sat_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let started = Instant::now();
    let (mut agree, mut sat) = (0, 0);
    for _ in 0..1000 {
        let cnf = random_cnf(&mut rng);
        let expected = truth_table_sat(&cnf);
        let got = solve(&cnf);
        let ok = match &got {
            SatResult::Sat(model) => expected && cnf.satisfied_by(model),
            SatResult::Unsat => !expected,
        };
        agree += ok as u32;
        sat += expected as u32;
    }
    let secs = started.elapsed().as_secs_f64();
    outcome(
        agree == 1000 && secs < 30.0,
        format!("{agree}/1000 agree ({sat} satisfiable), {secs:.2} s"),
    )
}

// ---------------------------------------------------------------- automata

/// Direct reading of `(E;)+` with `E = N | S | W | S W`.
fn in_language(tokens: &[Token]) -> bool {
    if tokens.last() != Some(&Token::Sep) {
        return false;
    }
    tokens[..tokens.len() - 1]
        .split(|t| *t == Token::Sep)
        .all(|e| match e {
            [Token::N] => true,
            [x] => Token::SITUATIONAL.contains(x) || Token::WEATHER.contains(x),
            [s, w] => Token::SITUATIONAL.contains(s) && Token::WEATHER.contains(w),
            _ => false,
        })
}

fn all_strings(max_len: usize) -> Vec<Vec<Token>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in Token::ALL {
                let mut x: Vec<Token> = s.clone();
                x.push(t);
                next.push(x);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Strings that stay close to the language so random checks reach past the
/// first separator.
fn random_string(rng: &mut ChaCha8Rng) -> Vec<Token> {
    let len = rng.random_range(0..=12);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let t = if rng.random_bool(0.3) {
            Token::Sep
        } else {
            Token::ALL[rng.random_range(0..Token::COUNT)]
        };
        out.push(t);
    }
    out
}

/// Reachable states, and whether every pair is told apart by some suffix of
/// length at most `depth`, found by brute force.
fn brute_force_minimal(dfa: &Dfa, depth: usize) -> (usize, bool) {
    let mut seen = BTreeSet::from([dfa.start]);
    let mut queue = VecDeque::from([dfa.start]);
    while let Some(s) = queue.pop_front() {
        for t in Token::ALL {
            let n = dfa.next(s, t);
            if seen.insert(n) {
                queue.push_back(n);
            }
        }
    }
    let suffixes = all_strings(depth);
    let run_from = |s: usize, w: &[Token]| dfa.accepting[w.iter().fold(s, |q, t| dfa.next(q, *t))];
    let states: Vec<usize> = seen.iter().copied().collect();
    let distinct = states.iter().enumerate().all(|(i, &a)| {
        states[i + 1..]
            .iter()
            .all(|&b| suffixes.iter().any(|w| run_from(a, w) != run_from(b, w)))
    });
    (seen.len(), distinct)
}

fn automata() -> Outcome {
    let nfa = compile(&threat_language());
    let dfa = threat_acceptor();
    let exhaustive = all_strings(4);
    let mut mismatches = 0usize;
    for s in &exhaustive {
        let d = dfa.accepts(s);
        mismatches += (d != nfa.accepts(s) || d != in_language(s)) as usize;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut accepted = 0usize;
    for _ in 0..100_000 {
        let s = random_string(&mut rng);
        let d = dfa.accepts(&s);
        accepted += d as usize;
        mismatches += (d != nfa.accepts(&s) || d != in_language(&s)) as usize;
    }
    let (reachable, distinct) = brute_force_minimal(dfa, 3);
    outcome(
        mismatches == 0 && dfa.len() == 5 && reachable == 5 && distinct,
        format!(
            "{} exhaustive + 100000 random strings, {mismatches} mismatches ({accepted} random accepted); \
             {} states, {reachable} reachable, pairwise distinguishable: {distinct}",
            exhaustive.len(),
            dfa.len()
        ),
    )
}

// ---------------------------------------------------------------- trilateration

fn planted(area: &AreaConfig, rng: &mut ChaCha8Rng) -> GeoPoint {
    let trail = &area.trails[rng.random_range(0..area.trails.len())];
    trail
        .polyline
        .position_clamped(rng.random_range(0.0..trail.polyline.length()))
}

fn observations(
    area: &AreaConfig,
    p: GeoPoint,
    noise: Option<(&Normal<f64>, &mut ChaCha8Rng)>,
) -> Vec<BtsObservation> {
    let mut noise = noise;
    area.bts_stations
        .iter()
        .filter(|b| b.location.distance(&p) <= b.max_range)
        .map(|b| {
            let mut rssi = b.rssi_at(b.location.distance(&p));
            if let Some((n, rng)) = noise.as_mut() {
                rssi += n.sample(*rng);
            }
            BtsObservation {
                station: b.id,
                rssi,
            }
        })
        .collect()
}

fn trilateration() -> Outcome {
    let area = default_area();
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut worst: f64 = 0.0;
    let mut recovered = 0;
    for _ in 0..500 {
        let p = planted(&area, &mut rng);
        let obs = observations(&area, p, None);
        if let Ok(g) = a1_geolocate(&area, TouristId(1), 0, &obs, None, &[], None) {
            let err = g.fix.point.distance(&p);
            worst = worst.max(err);
            recovered += (err <= 0.5) as u32;
        }
    }

    // With noise: the event must fire exactly when the chosen point misses the
    // third-strongest circle by more than the accuracy limit.
    let normal = Normal::new(0.0, 3.0).unwrap();
    let limit = area.thresholds.accuracy;
    let (mut agree, mut fired, mut trials) = (0, 0, 0);
    for _ in 0..500 {
        let p = planted(&area, &mut rng);
        let obs = observations(&area, p, Some((&normal, &mut rng)));
        let Ok(g) = a1_geolocate(&area, TouristId(1), 0, &obs, None, &[], None) else {
            continue;
        };
        trials += 1;
        let mut sorted = obs.clone();
        sorted.sort_by(|a, b| b.rssi.total_cmp(&a.rssi).then(a.station.cmp(&b.station)));
        let expected = sorted.get(2).is_some_and(|o| {
            let s = area.bts_station(o.station);
            (g.fix.point.distance(&s.location) - s.distance_for(o.rssi)).abs() > limit
        });
        fired += g.low_accuracy.is_some() as u32;
        agree += (g.low_accuracy.is_some() == expected) as u32;
    }
    outcome(
        recovered == 500 && agree == trials && fired > 0 && fired < trials,
        format!(
            "noiseless {recovered}/500 within 0.5 m (worst {worst:.2e} m); \
             σ=3 dB: event predicate {agree}/{trials}, {fired} fired"
        ),
    )
}

// ---------------------------------------------------------------- seeded runs

struct RunSummary {
    scenario: u8,
    /// Weather threat verdicts E2..E5.
    weather: [u64; 4],
    no_motion: u64,
    rejected_traces: usize,
    traces: usize,
    dumps: usize,
    conservation_breaks: usize,
    without_cycles: usize,
    departed: usize,
    transitions_emitted: bool,
    solver_mean_ms: f64,
}

fn run_scenario(scenario: u8, seed: u64) -> RunOutput {
    let lib = default_scenarios();
    let mut params = lib.params.clone();
    params.seed = seed;
    let cfg = RunConfig::new(
        Arc::new(default_area()),
        lib.scenario(scenario).unwrap().clone(),
        lib.exposure,
        params,
        default_alert_sets(),
    );
    run(cfg).unwrap()
}

fn summarize(scenario: u8, out: &RunOutput) -> RunSummary {
    let p = &out.pipeline;
    let c = p.counters();
    let rejected_traces = p
        .traces()
        .values()
        .filter(|t| !accepts(&trace_tokens(t.iter().map(|b| b.th.as_slice()))))
        .count();
    let conservation_breaks = out
        .dumps
        .iter()
        .filter(|d| {
            let q = &d.population;
            q.total != q.left + q.current || q.current != q.gps_located + q.bts_located
        })
        .count();
    let last = out.dumps.last().expect("a full run takes dumps");
    let t = &last.transitions;
    RunSummary {
        scenario,
        weather: [c.weather[1], c.weather[2], c.weather[3], c.weather[4]],
        no_motion: c.situational[2],
        rejected_traces,
        traces: p.traces().len(),
        dumps: out.dumps.len(),
        conservation_breaks,
        without_cycles: stays_without_cycles(p.stays()).len(),
        departed: p.stays().len(),
        transitions_emitted: t.tourists > 0 && t.stddev.is_finite() && t.min <= t.max,
        solver_mean_ms: last.solver.mean_ms,
    }
}

const SEEDS: u64 = 10;

fn batch() -> Vec<RunSummary> {
    let started = Instant::now();
    let mut out = Vec::new();
    for scenario in 1..=5u8 {
        for seed in 1..=SEEDS {
            out.push(summarize(scenario, &run_scenario(scenario, seed)));
        }
    }
    println!(
        "  ({} seeded runs of 3600 s in {:.1} s)",
        out.len(),
        started.elapsed().as_secs_f64()
    );
    out
}

fn scenario_mean(runs: &[RunSummary], scenario: u8, f: impl Fn(&RunSummary) -> f64) -> f64 {
    let xs: Vec<f64> = runs
        .iter()
        .filter(|r| r.scenario == scenario)
        .map(f)
        .collect();
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn weather_total(r: &RunSummary) -> f64 {
    r.weather.iter().sum::<u64>() as f64
}

fn sat_timing(runs: &[RunSummary]) -> Outcome {
    let worst = runs.iter().map(|r| r.solver_mean_ms).fold(0.0, f64::max);
    let mean = runs.iter().map(|r| r.solver_mean_ms).sum::<f64>() / runs.len() as f64;
    outcome(
        worst < 10.0,
        format!(
            "mean per-call {mean:.4} ms, worst run {worst:.4} ms over {} runs",
            runs.len()
        ),
    )
}

fn language_closure(runs: &[RunSummary]) -> Outcome {
    let rejected: usize = runs.iter().map(|r| r.rejected_traces).sum();
    let traces: usize = runs.iter().map(|r| r.traces).sum();
    outcome(
        rejected == 0 && runs.len() >= 25,
        format!(
            "{rejected} of {traces} traces rejected over {} seeds x 5 scenarios",
            runs.len() / 5
        ),
    )
}

fn scenario_ordering(runs: &[RunSummary]) -> Outcome {
    let means: Vec<f64> = (1..=5)
        .map(|s| scenario_mean(runs, s, weather_total))
        .collect();
    let winter_min = means[3].min(means[4]);
    let summer_max = means[0].max(means[2]);
    let severe_1: u64 = runs
        .iter()
        .filter(|r| r.scenario == 1)
        .map(|r| r.weather[2] + r.weather[3])
        .sum();
    outcome(
        winter_min > summer_max && severe_1 == 0,
        format!(
            "mean weather threats #1..#5 = {:.0} / {:.0} / {:.0} / {:.0} / {:.0}; #1 E4+E5 = {severe_1}",
            means[0], means[1], means[2], means[3], means[4]
        ),
    )
}

fn conservation(runs: &[RunSummary]) -> Outcome {
    let dumps: usize = runs.iter().map(|r| r.dumps).sum();
    let breaks: usize = runs.iter().map(|r| r.conservation_breaks).sum();
    outcome(
        breaks == 0 && dumps > 0,
        format!("{breaks} violations in {dumps} dumps"),
    )
}

// ---------------------------------------------------------------- scripted pipeline

const PERIOD: Timestamp = 30;

#[derive(Clone, Copy)]
struct Weather {
    wind: f64,
    visibility: f64,
    temperature: f64,
    rain: f64,
}

const FAIR: Weather = Weather {
    wind: 1.0,
    visibility: 9000.0,
    temperature: 18.0,
    rain: 0.0,
};

fn message(topic: Topic, t: Timestamp, payload: Payload) -> Message {
    Message {
        topic,
        timestamp: t,
        sequence: 0,
        payload,
    }
}

fn cycle_messages(
    area: &AreaConfig,
    t: Timestamp,
    w: Weather,
    tourists: &[(u32, GeoPoint)],
) -> Vec<Message> {
    let mut msgs: Vec<Message> = (0..area.weather_stations.len())
        .map(|i| {
            message(
                Topic::Weather,
                t,
                Payload::Weather(WeatherReading {
                    station: WeatherStationId(i as u16),
                    wind: w.wind,
                    visibility: w.visibility,
                    temperature: w.temperature,
                    rain: w.rain,
                }),
            )
        })
        .collect();
    for &(id, point) in tourists {
        msgs.push(message(
            Topic::GpsTourist,
            t,
            Payload::GpsTourist(TouristFix {
                tourist: TouristId(id),
                point,
            }),
        ));
    }
    msgs
}

fn scripted_pipeline() -> (Arc<AreaConfig>, Pipeline) {
    let area = Arc::new(default_area());
    let p = Pipeline::new(
        area.clone(),
        default_alert_sets(),
        PipelineConfig::default(),
    );
    (area, p)
}

fn on_h1(area: &AreaConfig, s: f64) -> GeoPoint {
    area.trail_by_label("H1")
        .unwrap()
        .polyline
        .position_clamped(s)
}

/// Mean transitions of `n` static tourists whose weather toggles every
/// `half_period` cycles.
fn mean_transitions(n: u32, cycles: u64, half_period: u64) -> f64 {
    let (area, mut p) = scripted_pipeline();
    let windy = Weather { wind: 12.0, ..FAIR };
    let linger = area.thresholds.signal_timeout / PERIOD + 2;
    for k in 1..=cycles + linger {
        let t = k * PERIOD;
        let w = if (k / half_period).is_multiple_of(2) {
            FAIR
        } else {
            windy
        };
        let tourists: Vec<(u32, GeoPoint)> = if k <= cycles {
            (1..=n)
                .map(|id| (id, on_h1(&area, 1000.0 + 200.0 * id as f64)))
                .collect()
        } else {
            Vec::new()
        };
        p.process_cycle(t, cycle_messages(&area, t, w, &tourists));
    }
    let stays = p.stays();
    stays.iter().map(|s| s.transitions as f64).sum::<f64>() / stays.len().max(1) as f64
}

fn transitions(runs: &[RunSummary]) -> Outcome {
    let without: usize = runs.iter().map(|r| r.without_cycles).sum();
    let departed: usize = runs.iter().map(|r| r.departed).sum();
    let emitted = runs.iter().all(|r| r.transitions_emitted);
    let slow = mean_transitions(5, 96, 8);
    let fast = mean_transitions(5, 96, 4);
    outcome(
        without == 0 && departed > 0 && emitted && slow > 0.0 && fast >= 2.0 * slow,
        format!(
            "{without} of {departed} departed tourists without cycles; statistics emitted: {emitted}; \
             mean transitions {slow:.2} -> {fast:.2} when fluctuation doubles"
        ),
    )
}

fn correlation(runs: &[RunSummary]) -> Outcome {
    let xs: Vec<f64> = (1..=5)
        .map(|s| scenario_mean(runs, s, weather_total))
        .collect();
    let ys: Vec<f64> = (1..=5)
        .map(|s| scenario_mean(runs, s, |r| r.no_motion as f64))
        .collect();
    match pearson(&xs, &ys) {
        Ok(r) => outcome(
            r >= 0.8,
            format!(
                "r = {r:.4}; mean no-motion #1..#5 = {:.1} / {:.1} / {:.1} / {:.1} / {:.1}",
                ys[0], ys[1], ys[2], ys[3], ys[4]
            ),
        ),
        Err(e) => outcome(false, e.to_string()),
    }
}

fn weather_levels(cycles: u64, script: impl Fn(u64) -> Weather) -> Vec<WeatherLevel> {
    let (area, mut p) = scripted_pipeline();
    let point = on_h1(&area, 2000.0);
    (1..=cycles)
        .map(|k| {
            let t = k * PERIOD;
            let v = p.process_cycle(t, cycle_messages(&area, t, script(k), &[(1, point)]));
            v[0].weather
        })
        .collect()
}

fn change_cycles(levels: &[WeatherLevel]) -> Vec<u64> {
    levels
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, _)| i as u64 + 2)
        .collect()
}

fn row() -> ContextRow {
    ContextRow {
        tourist: TouristId(1),
        fix: GeoFix {
            tourist: TouristId(1),
            point: GeoPoint::new(0.0, 0.0),
            source: FixSource::Gps,
            accuracy: 5.0,
            timestamp: 0,
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
        updated_at: 0,
    }
}

/// Every context, every factor: raising one tag level never lowers the verdict.
fn value_evaluation_violations() -> (usize, usize) {
    let lib = default_alert_sets();
    let set = &lib.sets[&lib.active];
    let mut reasoner = Reasoner::new();
    let (mut checked, mut violations) = (0, 0);
    for code in 0..81usize {
        let levels = [code % 3, code / 3 % 3, code / 9 % 3, code / 27];
        for d in Difficulty::ALL {
            for dn in [DayNight::Day, DayNight::Night] {
                for season in [Season::Summer, Season::Winter] {
                    for a in 1..=5u8 {
                        let mut r = row();
                        for (f, l) in WeatherFactor::ALL.into_iter().zip(levels) {
                            r.tags.set(f, TagLevel::from_index(l).unwrap());
                        }
                        r.difficulty = d;
                        r.day_night = dn;
                        r.season = season;
                        r.avalanche = AvalancheLevel::new(a).unwrap();
                        let before = reasoner.weather_cascade(&r, set);
                        for f in WeatherFactor::ALL {
                            let Some(up) = TagLevel::from_index(r.tags.get(f).index() + 1) else {
                                continue;
                            };
                            let mut raised = r.clone();
                            raised.tags.set(f, up);
                            checked += 1;
                            violations +=
                                (reasoner.weather_cascade(&raised, set) < before) as usize;
                        }
                    }
                }
            }
        }
    }
    (checked, violations)
}

fn semantic_preservation() -> Outcome {
    let storm = Weather { wind: 20.0, ..FAIR };
    let crossing = change_cycles(&weather_levels(12, |k| if k >= 5 { storm } else { FAIR }));
    let calm = change_cycles(&weather_levels(12, |_| FAIR));
    let windy = Weather { wind: 12.0, ..FAIR };
    let windy_fog = Weather {
        visibility: 150.0,
        ..windy
    };
    let two = weather_levels(10, |k| match k {
        0..=2 => FAIR,
        3..=5 => windy,
        _ => windy_fog,
    });
    let ordered = change_cycles(&two) == [3, 6] && two[0] < two[2] && two[2] < two[5];
    let (checked, violations) = value_evaluation_violations();
    outcome(
        crossing == [5] && calm.is_empty() && ordered && violations == 0,
        format!(
            "causation: change at {crossing:?} for a crossing at 5, {} changes without cause; \
             time-order: changes at {:?}; value-evaluation: {violations} of {checked} raises lowered the verdict",
            calm.len(),
            change_cycles(&two)
        ),
    )
}

// ---------------------------------------------------------------- preliminary

fn preliminary() -> Outcome {
    let mut rows_ok = true;
    let (mut hits, mut draws) = (0u64, 0u64);
    let (mut relations, mut activity, mut location) = (0u64, 0u64, 0u64);
    for seed in 1..=100 {
        let report = run_preliminary(&PreliminaryParams {
            seed,
            ..PreliminaryParams::default()
        });
        rows_ok &= report.rows.len() == 48;
        for r in report.rows.iter().filter(|r| r.interval == 1) {
            hits += r.weather_total() as u64;
            draws += r.weather_draws as u64;
        }
        relations += report.categories.relations;
        activity += report.categories.activity;
        location += report.categories.location;
    }
    let freq = hits as f64 / draws as f64;
    outcome(
        rows_ok && (freq - 0.20).abs() <= 0.02 && relations > activity && relations > location,
        format!(
            "48 rows: {rows_ok}; interval-1 frequency {freq:.4} over 100 seeds; \
             relations {relations}, activity {activity}, location {location}"
        ),
    )
}

// ---------------------------------------------------------------- determinism

fn determinism() -> Outcome {
    let a = run_scenario(4, 42);
    let b = run_scenario(4, 42);
    let (ja, jb) = (a.pipeline.journal(), b.pipeline.journal());
    outcome(
        ja.as_bytes() == jb.as_bytes() && !ja.is_empty(),
        format!(
            "{} vs {} journal bytes, identical: {}",
            ja.len(),
            jb.len(),
            ja == jb
        ),
    )
}

fn main() {
    let mut results: Vec<(u8, &str, Outcome)> = Vec::new();
    let mut report = |n: u8, name: &'static str, o: Outcome| {
        println!(
            "{} {n:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };
    report(1, "SAT oracle equivalence", sat_oracle());
    let runs = batch();
    report(2, "SAT timing", sat_timing(&runs));
    report(3, "automata correctness", automata());
    report(4, "trilateration", trilateration());
    report(5, "language closure", language_closure(&runs));
    report(6, "scenario ordering", scenario_ordering(&runs));
    report(7, "population conservation", conservation(&runs));
    report(8, "context transitions", transitions(&runs));
    report(9, "threat correlation", correlation(&runs));
    report(10, "semantic preservation", semantic_preservation());
    report(11, "preliminary simulation", preliminary());
    report(12, "determinism", determinism());
    let failed: Vec<u8> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass",
        results.len() - failed.len(),
        results.len()
    );
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}
