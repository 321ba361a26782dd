//! Preliminary simulation: a 24-hour Monte-Carlo of threat occurrences with
//! fixed per-reading probabilities, no sensor processing involved.

use super::ArrivalParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreliminaryParams {
    pub seed: u64,
    pub arrival: ArrivalParams,
    pub start_hour: f64,
    pub readings: usize,
    pub interval_minutes: f64,
    /// Weather-threat probability in the morning interval.
    pub p_weather: f64,
    /// Relative increases for the afternoon and evening-night intervals.
    pub afternoon_increase: f64,
    pub night_increase: f64,
    pub group_fraction: f64,
    pub p_e6g: f64,
    pub p_e6a: f64,
    pub p_e6m: f64,
    pub p_e6r: f64,
}

impl Default for PreliminaryParams {
    fn default() -> Self {
        Self {
            seed: 1,
            arrival: ArrivalParams::default(),
            start_hour: 5.0,
            readings: 48,
            interval_minutes: 30.0,
            p_weather: 0.20,
            afternoon_increase: 0.20,
            night_increase: 1.00,
            group_fraction: 0.30,
            p_e6g: 0.05,
            p_e6a: 0.05,
            p_e6m: 0.05,
            p_e6r: 0.10,
        }
    }
}

impl PreliminaryParams {
    /// 1 for 05-11, 2 for 11-17, 3 for 17-05.
    pub fn interval_of(hour: f64) -> u8 {
        let h = hour.rem_euclid(24.0);
        if (5.0..11.0).contains(&h) {
            1
        } else if (11.0..17.0).contains(&h) {
            2
        } else {
            3
        }
    }

    pub fn weather_probability(&self, interval: u8) -> f64 {
        match interval {
            1 => self.p_weather,
            2 => self.p_weather * (1.0 + self.afternoon_increase),
            _ => self.p_weather * (1.0 + self.night_increase),
        }
        .min(1.0)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PreliminaryRow {
    pub index: usize,
    pub clock: String,
    pub interval: u8,
    pub tourists: u32,
    /// Tourists for which the weather draw was made.
    pub weather_draws: u32,
    /// Weather threats by level E2..E5.
    pub weather: [u32; 4],
    pub e6g: u32,
    pub e6a: u32,
    pub e6m: u32,
    pub e6r: u32,
}

impl PreliminaryRow {
    pub fn weather_total(&self) -> u32 {
        self.weather.iter().sum()
    }
}

/// Readings consulted per context category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CategoryCounts {
    pub individuality: u64,
    pub time: u64,
    pub location: u64,
    pub activity: u64,
    pub relations: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct PreliminaryReport {
    pub rows: Vec<PreliminaryRow>,
    pub categories: CategoryCounts,
}

impl PreliminaryReport {
    /// Empirical weather-threat frequency among weather draws in `interval`.
    pub fn weather_frequency(&self, interval: u8) -> Option<f64> {
        let (hits, draws) = self
            .rows
            .iter()
            .filter(|r| r.interval == interval)
            .fold((0u64, 0u64), |(h, d), r| {
                (h + r.weather_total() as u64, d + r.weather_draws as u64)
            });
        (draws > 0).then(|| hits as f64 / draws as f64)
    }
}

pub fn run_preliminary(p: &PreliminaryParams) -> PreliminaryReport {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut report = PreliminaryReport::default();
    let c = &mut report.categories;
    for index in 0..p.readings {
        let hour = p.start_hour + index as f64 * p.interval_minutes / 60.0;
        let interval = PreliminaryParams::interval_of(hour);
        let minutes = (hour * 60.0).round() as u32 % (24 * 60);
        let mut row = PreliminaryRow {
            index: index + 1,
            clock: format!("{:02}:{:02}", minutes / 60, minutes % 60),
            interval,
            tourists: p.arrival.occupancy(hour).round() as u32,
            ..Default::default()
        };
        let pw = p.weather_probability(interval);
        for _ in 0..row.tourists {
            let grouped = rng.random_bool(p.group_fraction);
            let g = grouped && rng.random_bool(p.p_e6g);
            let a = rng.random_bool(p.p_e6a);
            let m = rng.random_bool(p.p_e6m);
            let r = rng.random_bool(p.p_e6r);
            row.e6g += g as u32;
            row.e6a += a as u32;
            row.e6m += m as u32;
            row.e6r += r as u32;
            c.relations += 1 + grouped as u64;
            c.activity += 1;
            c.location += 1;
            if g || a || m || r {
                continue;
            }
            row.weather_draws += 1;
            c.individuality += 1;
            c.time += 1;
            if rng.random_bool(pw) {
                row.weather[rng.random_range(0..4)] += 1;
            }
        }
        report.rows.push(row);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_probabilities() {
        let p = PreliminaryParams::default();
        assert!((p.weather_probability(1) - 0.20).abs() < 1e-12);
        assert!((p.weather_probability(2) - 0.24).abs() < 1e-12);
        assert!((p.weather_probability(3) - 0.40).abs() < 1e-12);
        assert_eq!(PreliminaryParams::interval_of(5.0), 1);
        assert_eq!(PreliminaryParams::interval_of(10.99), 1);
        assert_eq!(PreliminaryParams::interval_of(11.0), 2);
        assert_eq!(PreliminaryParams::interval_of(17.0), 3);
        assert_eq!(PreliminaryParams::interval_of(28.5), 3);
    }

    #[test]
    fn forty_eight_rows_with_peak_at_two_pm() {
        let r = run_preliminary(&PreliminaryParams::default());
        assert_eq!(r.rows.len(), 48);
        assert_eq!(r.rows[0].clock, "05:00");
        assert_eq!(r.rows[47].clock, "04:30");
        let peak = r.rows.iter().max_by_key(|row| row.tourists).unwrap();
        assert_eq!(peak.clock, "14:00");
        assert_eq!(peak.tourists, 200);
    }

    #[test]
    fn zero_tourists_zero_counts() {
        let mut p = PreliminaryParams::default();
        p.arrival.peak = 0.0;
        let r = run_preliminary(&p);
        assert!(r.rows.iter().all(|row| *row
            == PreliminaryRow {
                index: row.index,
                clock: row.clock.clone(),
                interval: row.interval,
                ..Default::default()
            }));
        assert_eq!(r.categories, CategoryCounts::default());
    }

    #[test]
    fn s_threat_skips_weather_draw() {
        let mut p = PreliminaryParams::default();
        p.p_e6r = 1.0;
        let r = run_preliminary(&p);
        assert!(r
            .rows
            .iter()
            .all(|row| row.weather_draws == 0 && row.weather_total() == 0));
        assert_eq!(r.categories.individuality, 0);
    }
}
