//! Command-line entry point: scenario runs, the preliminary simulation and
//! threat-language tools.

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use summit::analytics::{
    dumps_csv, general_overview_csv, groups_csv, proximity_csv, sharing_csv, solver_csv,
    threat_report_csv, transitions_csv, Dump, ProximityReport, ThreatReport,
};
use summit::repository::{default_alert_sets, load_alert_sets};
use summit::runner::{run, RunConfig, RunError};
use summit::simulator::{default_scenarios, load_scenarios, run_preliminary, PreliminaryParams};
use summit::threatlang::{accepts, render, threat_acceptor, tokenize, trace_tokens};
use summit::world::{default_area, load_area};

#[derive(Parser)]
#[command(
    name = "summit",
    version,
    about = "Mountain rescue context engine and simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario end to end and write every report.
    Run(RunArgs),
    /// 24-hour Monte-Carlo of threat occurrences.
    Preliminary(PreliminaryArgs),
    /// Threat-language acceptor tools.
    Lang {
        #[command(subcommand)]
        command: LangCommand,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    scenario: u8,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Simulated seconds; defaults to the scenario file's value.
    #[arg(long)]
    duration: Option<u64>,
    /// Recorded in the summary only; runs are not paced.
    #[arg(long)]
    speedup: Option<f64>,
    #[arg(long, default_value_t = 300)]
    dump_every: u64,
    /// Alert-set file.
    #[arg(long)]
    alerts: Option<PathBuf>,
    /// Alert set to activate instead of the file's default.
    #[arg(long)]
    alert_set: Option<String>,
    /// Area configuration file.
    #[arg(long)]
    area: Option<PathBuf>,
    /// Scenario and parameter file.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write an SVG map with every dump.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct PreliminaryArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Consecutive seeds to aggregate into the category histogram.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    /// Overrides the peak number of tourists.
    #[arg(long)]
    peak: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum LangCommand {
    /// Print the minimal acceptor.
    DumpDfa {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check every trace in a file; each line ends with a tab-separated sentence.
    Check { traces: PathBuf },
}

/// Failure classes mapped to exit codes 2 and 1.
enum Failure {
    Usage(anyhow::Error),
    Domain(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

fn usage<T, E>(r: std::result::Result<T, E>, what: impl FnOnce() -> String) -> Result<T, Failure>
where
    E: Into<anyhow::Error>,
{
    r.map_err(|e| Failure::Usage(e.into().context(what())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Preliminary(args) => cmd_preliminary(args),
        Command::Lang { command } => cmd_lang(command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    usage(fs::read_to_string(path), || {
        format!("reading {}", path.display())
    })
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct TraceSummary {
    tourists: usize,
    points: usize,
    rejected: usize,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: u8,
    scenario_name: &'a str,
    season: String,
    seed: u64,
    duration: u64,
    speedup: f64,
    dump_every: u64,
    alert_set: String,
    cycles: u64,
    final_dump: Option<&'a Dump>,
    threats: &'a ThreatReport,
    proximity: &'a ProximityReport,
    traces: TraceSummary,
    simulator_arrivals: u64,
    simulator_departures: u64,
    simulator_population: usize,
    simulator_events: BTreeMap<String, usize>,
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let area = match &args.area {
        Some(p) => usage(load_area(&read(p)?), || {
            format!("loading area {}", p.display())
        })?,
        None => default_area(),
    };
    let alerts = match &args.alerts {
        Some(p) => usage(load_alert_sets(&read(p)?), || {
            format!("loading alerts {}", p.display())
        })?,
        None => default_alert_sets(),
    };
    let library = match &args.scenario_file {
        Some(p) => usage(load_scenarios(&read(p)?), || {
            format!("loading scenarios {}", p.display())
        })?,
        None => default_scenarios(),
    };
    let scenario = usage(library.scenario(args.scenario).cloned(), || {
        "selecting scenario".into()
    })?;
    let mut params = library.params.clone();
    params.seed = args.seed;
    if let Some(d) = args.duration {
        params.duration = d;
    }
    if let Some(s) = args.speedup {
        params.speedup = s;
    }
    let (speedup, duration) = (params.speedup, params.duration);
    let mut cfg = RunConfig::new(
        Arc::new(area),
        scenario.clone(),
        library.exposure,
        params,
        alerts,
    );
    cfg.alert_set = args.alert_set.clone();
    cfg.dump_every = args.dump_every;
    cfg.frames = args.svg;
    let out = match run(cfg) {
        Ok(o) => o,
        Err(e @ (RunError::Sim(_) | RunError::UnknownAlertSet(_) | RunError::Invalid(_))) => {
            return Err(Failure::Usage(anyhow!(e)))
        }
        Err(e) => return Err(Failure::Domain(anyhow!(e))),
    };

    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = &out.pipeline;
    let journal = p.journal();
    write(dir, "journal.tsv", journal)?;

    let mut traces = String::new();
    let mut points = String::new();
    let mut rejected = 0;
    let mut point_count = 0;
    for (id, trace) in p.traces() {
        let tokens = trace_tokens(trace.iter().map(|b| b.th.as_slice()));
        rejected += usize::from(!accepts(&tokens));
        traces.push_str(&format!("{id}\t{}\n", render(&tokens)));
        for b in trace {
            points.push_str(&b.to_tsv());
            points.push('\n');
        }
        point_count += trace.len();
    }
    write(dir, "traces.tsv", &traces)?;
    write(dir, "behavior_points.tsv", &points)?;

    let threats = ThreatReport::from_journal(journal).map_err(anyhow::Error::from)?;
    let proximity = ProximityReport::from_journal(journal).map_err(anyhow::Error::from)?;
    let column = format!("#{}", args.scenario);
    let last = out.dumps.last();
    if let Some(d) = last {
        let col = [(column.clone(), d)];
        write(dir, "general_overview.csv", general_overview_csv(&col))?;
        write(dir, "groups.csv", groups_csv(&col))?;
        write(
            dir,
            "context_transitions.csv",
            transitions_csv(&[(column.clone(), &d.transitions)]),
        )?;
        write(
            dir,
            "sat_solver.csv",
            solver_csv(&[(column.clone(), &d.solver)]),
        )?;
        write(dir, "context_sharing.csv", sharing_csv(&d.sharing))?;
    }
    let routes: Vec<String> = p.area().trails.iter().map(|t| t.label.clone()).collect();
    write(
        dir,
        "weather_threats.csv",
        threat_report_csv(&[(column.clone(), scenario.season, &threats)], &routes),
    )?;
    write(
        dir,
        "spatial_proximity.csv",
        proximity_csv(&[(column, &proximity)]),
    )?;
    write(dir, "dumps.csv", dumps_csv(&out.dumps))?;
    write(
        dir,
        "dumps.json",
        serde_json::to_string_pretty(&out.dumps).context("encoding dumps")?,
    )?;
    let mut events = BTreeMap::new();
    let mut event_lines = String::new();
    for e in out.sim_log.events() {
        *events.entry(format!("{:?}", e.kind)).or_insert(0) += 1;
        event_lines.push_str(&format!("{e}\n"));
    }
    write(dir, "sim_events.tsv", &event_lines)?;
    let summary = Summary {
        scenario: args.scenario,
        scenario_name: &scenario.name,
        season: format!("{:?}", scenario.season),
        seed: args.seed,
        duration,
        speedup,
        dump_every: args.dump_every,
        alert_set: p.repository().active_alert_set().to_string(),
        cycles: p.counters().cycles,
        final_dump: last,
        threats: &threats,
        proximity: &proximity,
        traces: TraceSummary {
            tourists: p.traces().len(),
            points: point_count,
            rejected,
        },
        simulator_arrivals: out.sim_arrivals,
        simulator_departures: out.sim_departures,
        simulator_population: out.sim_population,
        simulator_events: events,
    };
    write(
        dir,
        "summary.json",
        serde_json::to_string_pretty(&summary).context("encoding summary")?,
    )?;
    if !out.frames.is_empty() {
        let frames = dir.join("frames");
        fs::create_dir_all(&frames).with_context(|| format!("creating {}", frames.display()))?;
        for (i, f) in out.frames.iter().enumerate() {
            write(
                &frames,
                &format!("frame_{:02}_{}.svg", i + 1, f.timestamp),
                &f.svg,
            )?;
        }
    }
    println!(
        "scenario #{} seed {}: {} tourists, {} weather threats, {} dumps, output in {}",
        args.scenario,
        args.seed,
        p.counters().arrivals,
        threats.total(),
        out.dumps.len(),
        dir.display()
    );
    if rejected > 0 {
        return Err(anyhow!("{rejected} behavior traces rejected by the acceptor").into());
    }
    Ok(())
}

fn cmd_preliminary(args: PreliminaryArgs) -> Result<(), Failure> {
    if args.seeds == 0 {
        return Err(Failure::Usage(anyhow!("--seeds must be at least 1")));
    }
    let mut params = PreliminaryParams {
        seed: args.seed,
        ..PreliminaryParams::default()
    };
    if let Some(peak) = args.peak {
        if !(peak.is_finite() && peak >= 0.0) {
            return Err(Failure::Usage(anyhow!(
                "--peak must be a non-negative number"
            )));
        }
        params.arrival.peak = peak;
    }
    let first = run_preliminary(&params);
    let mut categories = first.categories;
    for seed in args.seed + 1..args.seed + args.seeds {
        let c = run_preliminary(&PreliminaryParams {
            seed,
            ..params.clone()
        })
        .categories;
        categories.individuality += c.individuality;
        categories.time += c.time;
        categories.location += c.location;
        categories.activity += c.activity;
        categories.relations += c.relations;
    }

    let dir = &args.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "reading",
        "time",
        "interval",
        "tourists",
        "weather_draws",
        "E2",
        "E3",
        "E4",
        "E5",
        "E6g",
        "E6a",
        "E6m",
        "E6r",
    ])
    .context("encoding csv")?;
    for r in &first.rows {
        let mut rec = vec![
            r.index.to_string(),
            r.clock.clone(),
            r.interval.to_string(),
            r.tourists.to_string(),
            r.weather_draws.to_string(),
        ];
        rec.extend(r.weather.iter().map(u32::to_string));
        rec.extend([r.e6g, r.e6a, r.e6m, r.e6r].iter().map(u32::to_string));
        w.write_record(rec).context("encoding csv")?;
    }
    write(
        dir,
        "preliminary.csv",
        w.into_inner().context("encoding csv")?,
    )?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["category", "count"])
        .context("encoding csv")?;
    for (name, n) in [
        ("Individuality", categories.individuality),
        ("Time", categories.time),
        ("Location", categories.location),
        ("Activity", categories.activity),
        ("Relations", categories.relations),
    ] {
        w.write_record([name.to_string(), n.to_string()])
            .context("encoding csv")?;
    }
    write(
        dir,
        "categories.csv",
        w.into_inner().context("encoding csv")?,
    )?;
    for interval in 1..=3 {
        match first.weather_frequency(interval) {
            Some(f) => println!("interval {interval}: weather-threat frequency {f:.3}"),
            None => println!("interval {interval}: no weather draws"),
        }
    }
    Ok(())
}

fn cmd_lang(command: LangCommand) -> Result<(), Failure> {
    match command {
        LangCommand::DumpDfa { out } => {
            let text = threat_acceptor().to_text();
            match out {
                Some(path) => {
                    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?
                }
                None => print!("{text}"),
            }
            Ok(())
        }
        LangCommand::Check { traces } => {
            let text = read(&traces)?;
            let mut checked = 0;
            let mut bad = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                checked += 1;
                let sentence = line.rsplit('\t').next().unwrap_or(line);
                match tokenize(sentence) {
                    Ok(tokens) if accepts(&tokens) => {}
                    Ok(_) => bad.push(format!("line {}: rejected", i + 1)),
                    Err(e) => bad.push(format!("line {}: unknown token at {:?}", i + 1, e.rest)),
                }
            }
            for b in &bad {
                eprintln!("{b}");
            }
            println!("{} of {checked} traces accepted", checked - bad.len());
            if bad.is_empty() {
                Ok(())
            } else {
                Err(anyhow!("{} traces rejected", bad.len()).into())
            }
        }
    }
}
