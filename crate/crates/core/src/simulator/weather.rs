//! Scripted weather: piecewise severity curves per scenario, adjusted for
//! station exposure, with deterministic hash-seeded noise.

use crate::broker::WeatherReading;
use crate::context::{AvalancheLevel, Season};
use crate::world::{Timestamp, WeatherStation};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FactorValues {
    pub wind: f64,
    pub visibility: f64,
    pub temperature: f64,
    pub rain: f64,
}

impl FactorValues {
    fn lerp(&self, other: &FactorValues, t: f64) -> FactorValues {
        let f = |a: f64, b: f64| a + (b - a) * t;
        FactorValues {
            wind: f(self.wind, other.wind),
            visibility: f(self.visibility, other.visibility),
            temperature: f(self.temperature, other.temperature),
            rain: f(self.rain, other.rain),
        }
    }
}

/// One piece of a severity curve, active from `from` (fraction of the run)
/// until the next segment starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: f64,
    pub base: FactorValues,
    /// Linear drift from `base` at segment start to this at segment end.
    #[serde(default)]
    pub ramp_to: Option<FactorValues>,
    #[serde(default)]
    pub amplitude: FactorValues,
    #[serde(default)]
    pub noise: FactorValues,
    #[serde(default = "default_period")]
    pub period_minutes: f64,
}

fn default_period() -> f64 {
    20.0
}

/// Additive perturbation confined to some stations and a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub from: f64,
    pub to: f64,
    pub stations: Vec<String>,
    pub delta: FactorValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherScenario {
    pub id: u8,
    pub name: String,
    pub season: Season,
    pub avalanche: AvalancheLevel,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
    #[serde(default, rename = "disturbance")]
    pub disturbances: Vec<Disturbance>,
}

/// How much a fully exposed station (exposure 1) deviates from the curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExposureModel {
    pub wind_gain: f64,
    pub visibility_loss: f64,
    pub temperature_drop: f64,
    pub rain_gain: f64,
}

impl Default for ExposureModel {
    fn default() -> Self {
        Self {
            wind_gain: 6.0,
            visibility_loss: 0.5,
            temperature_drop: 5.0,
            rain_gain: 0.5,
        }
    }
}

impl WeatherScenario {
    /// Index of the segment active at run fraction `f`.
    pub fn segment_index(&self, f: f64) -> usize {
        self.segments.iter().rposition(|s| s.from <= f).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(1..=5).contains(&self.id) {
            return Err(format!("scenario id {} outside 1..=5", self.id));
        }
        if self.segments.is_empty() {
            return Err(format!("scenario {} has no segments", self.id));
        }
        if self.segments[0].from != 0.0 {
            return Err(format!(
                "scenario {}: first segment must start at 0",
                self.id
            ));
        }
        if self
            .segments
            .windows(2)
            .any(|w| w[1].from <= w[0].from || w[1].from >= 1.0)
        {
            return Err(format!(
                "scenario {}: segment starts must increase within [0,1)",
                self.id
            ));
        }
        if self.segments.iter().any(|s| s.period_minutes <= 0.0) {
            return Err(format!("scenario {}: period must be positive", self.id));
        }
        Ok(())
    }

    /// Raw reading of `station` at simulated time `t` in a run of `duration` seconds.
    pub fn weather_at(
        &self,
        exposure: &ExposureModel,
        station: &WeatherStation,
        t: Timestamp,
        duration: Timestamp,
        seed: u64,
    ) -> WeatherReading {
        let f = t as f64 / duration.max(1) as f64;
        let i = self.segment_index(f);
        let seg = &self.segments[i];
        let end = self.segments.get(i + 1).map_or(1.0, |s| s.from);
        let base = match &seg.ramp_to {
            Some(target) => seg
                .base
                .lerp(target, ((f - seg.from) / (end - seg.from)).clamp(0.0, 1.0)),
            None => seg.base,
        };
        let phase = TAU * t as f64 / (seg.period_minutes * 60.0) + 0.7 * station.id.0 as f64;
        let wave = phase.sin();
        let n = |k: u64| noise(seed, station.id.0 as u64, t, k);
        let mut v = FactorValues {
            wind: base.wind + seg.amplitude.wind * wave + seg.noise.wind * n(0),
            visibility: base.visibility - seg.amplitude.visibility * wave
                + seg.noise.visibility * n(1),
            temperature: base.temperature - seg.amplitude.temperature * wave
                + seg.noise.temperature * n(2),
            rain: base.rain + seg.amplitude.rain * wave + seg.noise.rain * n(3),
        };
        for d in &self.disturbances {
            if d.from <= f && f < d.to && d.stations.contains(&station.label) {
                v.wind += d.delta.wind;
                v.visibility += d.delta.visibility;
                v.temperature += d.delta.temperature;
                v.rain += d.delta.rain;
            }
        }
        let e = station.exposure;
        WeatherReading {
            station: station.id,
            wind: (v.wind + exposure.wind_gain * e).max(0.0),
            visibility: (v.visibility * (1.0 - exposure.visibility_loss * e)).max(10.0),
            temperature: v.temperature - exposure.temperature_drop * e,
            rain: (v.rain * (1.0 + exposure.rain_gain * e)).max(0.0),
        }
    }
}

/// Uniform value in [-1, 1] derived from the arguments alone.
fn noise(seed: u64, station: u64, t: Timestamp, factor: u64) -> f64 {
    let mut z = seed
        ^ station.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ t.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ factor.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}
