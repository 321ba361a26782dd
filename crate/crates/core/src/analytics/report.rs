//! Journal-derived reports and CSV tables labelled like the published ones.

use super::{
    AnalyticsError, Dump, SharingHistogram, SolverSummary, TransitionStats, SHARING_BANDS,
};
use crate::context::{Season, Situational, WeatherLevel};
use serde::Serialize;
use std::collections::BTreeMap;

/// Weather threats by level (E2..E5) and by route, plus situational tallies.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ThreatReport {
    pub verdicts: u64,
    pub levels: [u64; 4],
    pub routes: BTreeMap<String, [u64; 4]>,
    /// E6g, E6a, E6m, E6r.
    pub situational: [u64; 4],
}

fn journal_err(line: usize, reason: impl Into<String>) -> AnalyticsError {
    AnalyticsError::Journal {
        line,
        reason: reason.into(),
    }
}

impl ThreatReport {
    pub fn from_journal(journal: &str) -> Result<Self, AnalyticsError> {
        let mut r = Self::default();
        for (i, line) in journal.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f[0] != "V" {
                continue;
            }
            if f.len() != 12 {
                return Err(journal_err(i + 1, format!("{} fields", f.len())));
            }
            let level: WeatherLevel = f[4]
                .parse()
                .map_err(|e| journal_err(i + 1, format!("{e}")))?;
            let sit: crate::context::SituationalSet = f[5]
                .parse()
                .map_err(|e| journal_err(i + 1, format!("{e}")))?;
            r.verdicts += 1;
            if level.is_threat() {
                r.levels[level.index() - 1] += 1;
                r.routes.entry(f[8].to_string()).or_default()[level.index() - 1] += 1;
            }
            for (k, s) in Situational::ALL.iter().enumerate() {
                if sit.contains(*s) {
                    r.situational[k] += 1;
                }
            }
        }
        Ok(r)
    }

    pub fn total(&self) -> u64 {
        self.levels.iter().sum()
    }

    pub fn route_total(&self, route: &str) -> u64 {
        self.routes.get(route).map_or(0, |r| r.iter().sum())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeasonAverage {
    pub season: Season,
    pub runs: usize,
    pub levels: [f64; 4],
    pub routes: BTreeMap<String, f64>,
    pub total: f64,
}

/// Mean level and route totals per season, for seasons with at least one run.
pub fn season_averages(reports: &[(Season, &ThreatReport)]) -> Vec<SeasonAverage> {
    [Season::Summer, Season::Winter]
        .into_iter()
        .filter_map(|season| {
            let runs: Vec<&ThreatReport> = reports
                .iter()
                .filter(|(s, _)| *s == season)
                .map(|(_, r)| *r)
                .collect();
            if runs.is_empty() {
                return None;
            }
            let n = runs.len() as f64;
            let mut levels = [0.0; 4];
            let mut routes: BTreeMap<String, f64> = BTreeMap::new();
            for r in &runs {
                for (k, v) in r.levels.iter().enumerate() {
                    levels[k] += *v as f64 / n;
                }
                for route in r.routes.keys() {
                    *routes.entry(route.clone()).or_default() += r.route_total(route) as f64 / n;
                }
            }
            Some(SeasonAverage {
                season,
                runs: runs.len(),
                total: levels.iter().sum(),
                levels,
                routes,
            })
        })
        .collect()
}

/// Station-selection and group-redundancy tallies read back from a journal.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ProximityReport {
    pub tourists: u64,
    pub events: u64,
    /// Events by in-range station count: 0, 1, 2, 3+.
    pub by_stations: [u64; 4],
    pub groups: u64,
    pub average_group_size: f64,
    pub locations_improved: u64,
}

impl ProximityReport {
    pub fn from_journal(journal: &str) -> Result<Self, AnalyticsError> {
        let mut r = Self::default();
        let mut members = 0u64;
        for (i, line) in journal.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let field = |k: usize| -> Result<u64, AnalyticsError> {
                f.get(k)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| journal_err(i + 1, format!("bad field {k}")))
            };
            match f[0] {
                "A" => r.tourists += 1,
                "P" => {
                    r.events += 1;
                    r.by_stations[field(4)?.min(3) as usize] += 1;
                }
                "G" => {
                    r.groups += 1;
                    members += field(4)?;
                }
                "I" => r.locations_improved += 1,
                _ => {}
            }
        }
        if r.groups > 0 {
            r.average_group_size = members as f64 / r.groups as f64;
        }
        Ok(r)
    }

    pub fn events_per_tourist(&self) -> f64 {
        if self.tourists == 0 {
            0.0
        } else {
            self.events as f64 / self.tourists as f64
        }
    }
}

fn table(corner: &str, columns: &[String], rows: &[(String, Vec<String>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once(corner.to_string()).chain(columns.iter().cloned());
    w.write_record(header).expect("in-memory write");
    for (label, values) in rows {
        w.write_record(std::iter::once(label.clone()).chain(values.iter().cloned()))
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

fn row<T>(label: &str, items: &[T], f: impl Fn(&T) -> String) -> (String, Vec<String>) {
    (label.to_string(), items.iter().map(f).collect())
}

fn names<T>(columns: &[(String, T)]) -> Vec<String> {
    columns.iter().map(|(n, _)| n.clone()).collect()
}

pub fn general_overview_csv(columns: &[(String, &Dump)]) -> String {
    let c = columns;
    let rows = vec![
        row("Complete number of tourists", c, |(_, d)| {
            d.population.total.to_string()
        }),
        row("Tourists who left the area", c, |(_, d)| {
            d.population.left.to_string()
        }),
        row("Current/last number of tourists", c, |(_, d)| {
            d.population.current.to_string()
        }),
        row("BTS located tourists", c, |(_, d)| {
            d.population.bts_located.to_string()
        }),
        row("GPS located tourists", c, |(_, d)| {
            d.population.gps_located.to_string()
        }),
        row("Tourists who did not accept GPS data", c, |(_, d)| {
            d.population.refused.to_string()
        }),
        row("All low BTS location accuracy situations", c, |(_, d)| {
            d.counters.low_accuracy.to_string()
        }),
        row("\"One weather detector\" events", c, |(_, d)| {
            d.counters.proximity[1].to_string()
        }),
        row("Weather threats", c, |(_, d)| {
            d.counters.weather_threats().to_string()
        }),
        row("Animal threats", c, |(_, d)| {
            d.counters.situational_count(Situational::E6a).to_string()
        }),
        row("\"No motion\" situations", c, |(_, d)| {
            d.counters.situational_count(Situational::E6m).to_string()
        }),
        row("\"Out of route\" situations", c, |(_, d)| {
            d.counters.situational_count(Situational::E6r).to_string()
        }),
        row("Tourists who lost their group leader", c, |(_, d)| {
            d.counters.situational_count(Situational::E6g).to_string()
        }),
        row("SAT solver starts", c, |(_, d)| d.solver.starts.to_string()),
    ];
    table("General overview", &names(columns), &rows)
}

/// One column per run plus one average column per season present.
pub fn threat_report_csv(
    columns: &[(String, Season, &ThreatReport)],
    route_labels: &[String],
) -> String {
    let mut header: Vec<String> = columns.iter().map(|(n, _, _)| n.clone()).collect();
    let pairs: Vec<(Season, &ThreatReport)> = columns.iter().map(|(_, s, r)| (*s, *r)).collect();
    let averages = season_averages(&pairs);
    header.extend(
        averages
            .iter()
            .map(|a| format!("{:?} average", a.season).to_lowercase()),
    );
    let mut rows = Vec::new();
    for (k, level) in WeatherLevel::ALL[1..].iter().enumerate() {
        let mut values: Vec<String> = columns
            .iter()
            .map(|(_, _, r)| r.levels[k].to_string())
            .collect();
        values.extend(averages.iter().map(|a| format!("{:.1}", a.levels[k])));
        rows.push((format!("level {level}"), values));
    }
    for (k, route) in route_labels.iter().enumerate() {
        let mut values: Vec<String> = columns
            .iter()
            .map(|(_, _, r)| r.route_total(route).to_string())
            .collect();
        values.extend(
            averages
                .iter()
                .map(|a| format!("{:.1}", a.routes.get(route).copied().unwrap_or(0.0))),
        );
        rows.push((format!("Route no.{}", k + 1), values));
    }
    table("Scenario", &header, &rows)
}

pub fn solver_csv(columns: &[(String, &SolverSummary)]) -> String {
    let c = columns;
    let rows = vec![
        row("Number of SAT solver calls", c, |(_, s)| {
            s.calls.to_string()
        }),
        row("Average response time [ms]", c, |(_, s)| {
            format!("{:.4}", s.mean_ms)
        }),
        row("Standard deviation", c, |(_, s)| {
            format!("{:.4}", s.stddev_ms)
        }),
    ];
    table("SAT solver", &names(columns), &rows)
}

pub fn groups_csv(columns: &[(String, &Dump)]) -> String {
    let c = columns;
    let rows = vec![
        row("Tourists in groups (total number)", c, |(_, d)| {
            (d.groups.bts_members + d.groups.gps_members).to_string()
        }),
        row("Groups (total number)", c, |(_, d)| {
            d.groups.groups.to_string()
        }),
        row("Average group size", c, |(_, d)| {
            format!("{:.2}", d.groups.average_size)
        }),
        row("Number of BTS located tourists", c, |(_, d)| {
            d.groups.bts_members.to_string()
        }),
        row("Number of GPS located tourists", c, |(_, d)| {
            d.groups.gps_members.to_string()
        }),
        row("Locations improved", c, |(_, d)| {
            d.groups.improved.to_string()
        }),
    ];
    table("Groups", &names(columns), &rows)
}

pub fn proximity_csv(columns: &[(String, &ProximityReport)]) -> String {
    let c = columns;
    let rows = vec![
        row("Number of tourists", c, |(_, p)| p.tourists.to_string()),
        row("Total number of events", c, |(_, p)| p.events.to_string()),
        row("including no station in range", c, |(_, p)| {
            p.by_stations[0].to_string()
        }),
        row("including one station", c, |(_, p)| {
            p.by_stations[1].to_string()
        }),
        row("including two stations", c, |(_, p)| {
            p.by_stations[2].to_string()
        }),
        row("including three stations", c, |(_, p)| {
            p.by_stations[3].to_string()
        }),
        row("Number of events per tourist (average)", c, |(_, p)| {
            format!("{:.2}", p.events_per_tourist())
        }),
    ];
    table("Spatial proximity", &names(columns), &rows)
}

pub fn transitions_csv(columns: &[(String, &TransitionStats)]) -> String {
    let c = columns;
    let rows = vec![
        row("Number of tourists", c, |(_, s)| s.tourists.to_string()),
        row(
            "Number of transitions per tourist (average)",
            c,
            |(_, s)| format!("{:.2}", s.average),
        ),
        row("Minimum value", c, |(_, s)| s.min.to_string()),
        row("Maximum value", c, |(_, s)| s.max.to_string()),
        row("Standard deviation", c, |(_, s)| format!("{:.2}", s.stddev)),
    ];
    table("Context transitions", &names(columns), &rows)
}

pub fn sharing_csv(h: &SharingHistogram) -> String {
    let rows: Vec<(String, Vec<String>)> = SHARING_BANDS
        .iter()
        .zip(h.bands)
        .map(|(band, n)| (format!("{band}%"), vec![n.to_string()]))
        .collect();
    table("Context sharing", &["Pairs".to_string()], &rows)
}

/// One row per dump with the main cumulative counters.
pub fn dumps_csv(dumps: &[Dump]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dump",
        "timestamp",
        "clock",
        "total",
        "left",
        "current",
        "bts",
        "gps",
        "refused",
        "E2",
        "E3",
        "E4",
        "E5",
        "E6g",
        "E6a",
        "E6m",
        "E6r",
        "low_accuracy",
        "solver_calls",
        "solver_mean_ms",
        "transitions_avg",
        "sharing_0",
        "sharing_25",
        "sharing_50",
        "sharing_75",
        "sharing_100",
    ])
    .expect("in-memory write");
    for d in dumps {
        let mut rec = vec![
            d.index.to_string(),
            d.timestamp.to_string(),
            d.clock.clone(),
            d.population.total.to_string(),
            d.population.left.to_string(),
            d.population.current.to_string(),
            d.population.bts_located.to_string(),
            d.population.gps_located.to_string(),
            d.population.refused.to_string(),
        ];
        rec.extend(d.counters.weather[1..].iter().map(u64::to_string));
        rec.extend(d.counters.situational.iter().map(u64::to_string));
        rec.push(d.counters.low_accuracy.to_string());
        rec.push(d.solver.calls.to_string());
        rec.push(format!("{:.4}", d.solver.mean_ms));
        rec.push(format!("{:.2}", d.transitions.average));
        rec.extend(d.sharing.bands.iter().map(u64::to_string));
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_journal_gives_zero_tables() {
        assert_eq!(
            ThreatReport::from_journal("").unwrap(),
            ThreatReport::default()
        );
        assert_eq!(
            ProximityReport::from_journal("").unwrap(),
            ProximityReport::default()
        );
    }

    #[test]
    fn synthetic_journal_counts_cells() {
        let v = |lvl: &str, trail: &str, sit: &str| {
            format!("V\t0\t30\tT1\t{lvl}\t{sit}\t49.5\t19.5\t{trail}\tD1\tGPS\tfresh\n")
        };
        let journal = [
            v("E2", "H1", "-"),
            v("E2", "H1", "E6m"),
            v("E2", "H1", "-"),
            v("E1", "H2", "E6m,E6r"),
            "A\t0\tT1\n".to_string(),
        ]
        .concat();
        let r = ThreatReport::from_journal(&journal).unwrap();
        assert_eq!(r.verdicts, 4);
        assert_eq!(r.levels, [3, 0, 0, 0]);
        assert_eq!(r.routes["H1"], [3, 0, 0, 0]);
        assert!(!r.routes.contains_key("H2"));
        assert_eq!(r.situational, [0, 0, 2, 1]);
    }

    #[test]
    fn malformed_verdict_line_is_reported() {
        let err = ThreatReport::from_journal("A\t0\tT1\nV\t1\n").unwrap_err();
        assert!(matches!(err, AnalyticsError::Journal { line: 2, .. }));
    }

    #[test]
    fn proximity_from_journal() {
        let j = "A\t0\tT1\nA\t0\tT2\nP\t0\tT1\tWS1\t1\nP\t0\tT2\tWS1\t2\nP\t30\tT1\tWS2\t5\nG\t0\tG1\tT1\t2\nI\t30\tT2\n";
        let r = ProximityReport::from_journal(j).unwrap();
        assert_eq!(
            (r.tourists, r.events, r.groups, r.locations_improved),
            (2, 3, 1, 1)
        );
        assert_eq!(r.by_stations, [0, 1, 1, 1]);
        assert!((r.events_per_tourist() - 1.5).abs() < 1e-12);
        assert!((r.average_group_size - 2.0).abs() < 1e-12);
    }

    #[test]
    fn season_average_columns() {
        let a = ThreatReport {
            levels: [2, 0, 0, 0],
            ..Default::default()
        };
        let b = ThreatReport {
            levels: [4, 2, 0, 0],
            ..Default::default()
        };
        let csv = threat_report_csv(
            &[
                ("#1".into(), Season::Summer, &a),
                ("#2".into(), Season::Summer, &b),
            ],
            &[],
        );
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "Scenario,#1,#2,summer average");
        assert_eq!(lines[1], "level E2,2,4,3.0");
        assert_eq!(lines[2], "level E3,0,2,1.0");
    }
}
