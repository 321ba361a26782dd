//! End-to-end run: the simulator publishes on a broker from its own thread
//! while the pipeline consumes watermark-delimited cycles and dumps are taken
//! at fixed intervals.

use crate::analytics::{render_svg, take_dump, Dump, MapAnimal, SharingConfig};
use crate::broker::{Broker, BrokerError, Payload, Topic, DEFAULT_CAPACITY};
use crate::reasoning::{Inlet, Pipeline, PipelineConfig};
use crate::repository::AlertLibrary;
use crate::simulator::{
    ExposureModel, SimError, SimEventLog, SimParams, Simulator, WeatherScenario,
};
use crate::world::{AreaConfig, Timestamp};
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error("unknown alert set {0:?}")]
    UnknownAlertSet(String),
    #[error("invalid run settings: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The run uses the scenario's season in place of the area's.
    pub area: Arc<AreaConfig>,
    pub scenario: WeatherScenario,
    pub exposure: ExposureModel,
    pub params: SimParams,
    pub alerts: AlertLibrary,
    /// Overrides the library's active set.
    pub alert_set: Option<String>,
    pub pipeline: PipelineConfig,
    /// Seconds between dumps; 0 disables them.
    pub dump_every: Timestamp,
    pub sharing: SharingConfig,
    /// Render an SVG map with every dump.
    pub frames: bool,
    pub queue_capacity: usize,
}

impl RunConfig {
    pub fn new(
        area: Arc<AreaConfig>,
        scenario: WeatherScenario,
        exposure: ExposureModel,
        params: SimParams,
        alerts: AlertLibrary,
    ) -> Self {
        let sharing = SharingConfig {
            seed: params.seed,
            ..SharingConfig::default()
        };
        Self {
            area,
            scenario,
            exposure,
            params,
            alerts,
            alert_set: None,
            pipeline: PipelineConfig::default(),
            dump_every: 300,
            sharing,
            frames: false,
            queue_capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: Timestamp,
    pub svg: String,
}

pub struct RunOutput {
    pub pipeline: Pipeline,
    pub dumps: Vec<Dump>,
    pub frames: Vec<Frame>,
    pub sim_log: SimEventLog,
    pub sim_arrivals: u64,
    pub sim_departures: u64,
    /// Tourists still in the simulated area at the end.
    pub sim_population: usize,
}

pub fn run(cfg: RunConfig) -> Result<RunOutput, RunError> {
    let period = cfg.pipeline.cycle_period;
    if period == 0 {
        return Err(RunError::Invalid("cycle period must be positive".into()));
    }
    if !cfg.dump_every.is_multiple_of(period) {
        return Err(RunError::Invalid(format!(
            "dump interval {} is not a multiple of the cycle period {period}",
            cfg.dump_every
        )));
    }
    let mut alerts = cfg.alerts;
    if let Some(name) = cfg.alert_set {
        if !alerts.sets.contains_key(&name) {
            return Err(RunError::UnknownAlertSet(name));
        }
        alerts.active = name;
    }
    let area = if cfg.area.season == cfg.scenario.season {
        cfg.area
    } else {
        let mut a = (*cfg.area).clone();
        a.season = cfg.scenario.season;
        Arc::new(a)
    };
    let mut sim = Simulator::new(area.clone(), cfg.scenario, cfg.exposure, cfg.params)?;
    let mut pipeline = Pipeline::new(area, alerts, cfg.pipeline);
    let broker = Broker::new();
    let inlet = Inlet::with_capacity(&broker, cfg.queue_capacity)?;
    let (dump_every, sharing, frames_on) = (cfg.dump_every, cfg.sharing, cfg.frames);

    let (sim, dumps, frames) = std::thread::scope(|scope| {
        let producer = scope.spawn(|| -> Result<Simulator, BrokerError> {
            let result = publish_all(&mut sim, &broker, period);
            broker.close();
            result.map(|()| sim)
        });
        let mut dumps = Vec::new();
        let mut frames = Vec::new();
        while let Some((t, messages)) = inlet.next_cycle() {
            let verdicts = pipeline.process_cycle(t, messages);
            if dump_every > 0 && t > 0 && t % dump_every == 0 {
                dumps.push(take_dump(&pipeline, dumps.len() + 1, t, sharing));
                if frames_on {
                    let animals: Vec<MapAnimal> = pipeline
                        .animals()
                        .values()
                        .map(|(point, dangerous)| MapAnimal {
                            point: *point,
                            dangerous: *dangerous,
                        })
                        .collect();
                    frames.push(Frame {
                        timestamp: t,
                        svg: render_svg(pipeline.area(), &pipeline.snapshot(), &verdicts, &animals),
                    });
                }
            }
        }
        drop(inlet);
        let sim = producer.join().expect("simulator thread panicked");
        sim.map(|s| (s, dumps, frames))
    })?;
    Ok(RunOutput {
        sim_log: sim.log().clone(),
        sim_arrivals: sim.arrivals(),
        sim_departures: sim.departures(),
        sim_population: sim.population(),
        pipeline,
        dumps,
        frames,
    })
}

/// Steps the simulator to the end, closing every cycle with a watermark.
fn publish_all(sim: &mut Simulator, broker: &Broker, period: Timestamp) -> Result<(), BrokerError> {
    let mut last_mark = None;
    while !sim.finished() {
        let emission = sim.step();
        let t = sim.now();
        for (topic, payload) in emission {
            broker.publish(topic, t, payload)?;
        }
        if t.is_multiple_of(period) {
            watermark(broker, t)?;
            last_mark = Some(t);
        }
    }
    if last_mark != Some(sim.now()) {
        watermark(broker, sim.now())?;
    }
    Ok(())
}

fn watermark(broker: &Broker, t: Timestamp) -> Result<(), BrokerError> {
    for topic in Topic::ALL {
        broker.publish(topic, t, Payload::Watermark)?;
    }
    Ok(())
}
