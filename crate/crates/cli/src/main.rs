use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use tiltalloc::allocator::{find_trim, ActuatorFailure, TrimPhase};
use tiltalloc::config::{ConfigError, ConfigFile};
use tiltalloc::params::ACTUATOR_NAMES;
use tiltalloc::sim::{self, scenario, trace, Scenario, SimConfig, Summary};
use tiltalloc::wrench_space::{self, WrenchConfig};

#[derive(Parser)]
#[command(name = "tiltalloc", version, about = "Tiltrotor VTOL failure scenarios, trims and wrench-space reports")]
struct Cli {
    /// Directory for traces, summaries and data files.
    #[arg(long, global = true, env = "TILTALLOC_OUT", default_value = ".")]
    out: PathBuf,
    /// Overrides the scenario seed, or the sampling seed for `wrench`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Summary and report format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Kv)]
    format: Format,
    /// Print nothing on success.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Exit with status 1 when any run crashes.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Kv,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrimKind {
    Hover,
    Cruise,
}

#[derive(Subcommand)]
enum Command {
    /// Fly one scenario file; writes `<name>.csv` and `<name>_summary.<format>`.
    Run { scenario: PathBuf },
    /// Fly the five failure cases, informed and uninformed.
    Suite {
        /// Vehicle and controller settings; its scenario section is ignored.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sample wrench sets and check hover and cruise feasibility. The first
    /// `scenario.failure` in the file, if any, is analysed as well.
    Wrench {
        config: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        /// m/s
        #[arg(long, default_value_t = 20.0)]
        airspeed: f64,
    },
    /// Print a trim point.
    Trim {
        #[arg(value_enum)]
        phase: TrimKind,
        /// m/s
        #[arg(long, default_value_t = 20.0)]
        airspeed: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Fly a scenario file and write `<name>_<channel>.dat` files of (t, value).
    Plot {
        scenario: PathBuf,
        /// Trace columns, comma separated or repeated.
        #[arg(long, short, value_delimiter = ',')]
        channels: Vec<String>,
    },
    /// Print a configuration with every key filled in (defaults when no file is given).
    Config { file: Option<PathBuf> },
}

enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

struct Outcome {
    crashed: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(o) if cli.strict && o.crashed => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn load_sim(path: Option<&Path>) -> Result<SimConfig, CliError> {
    Ok(match path {
        Some(p) => ConfigFile::load(p)?.sim,
        None => SimConfig::default(),
    })
}

fn out_dir(cli: &Cli) -> Result<&Path, CliError> {
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    Ok(&cli.out)
}

fn render_summaries(rows: &[Summary], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut s = format!("{}\n", trace::SUMMARY_HEADER);
            for r in rows {
                let _ = writeln!(s, "{}", trace::summary_csv_row(r));
            }
            s
        }
        Format::Kv => rows.iter().map(trace::summary_kv).collect::<Vec<_>>().join("\n"),
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Kv => "kv",
    }
}

fn fly(sim_cfg: &SimConfig, s: &Scenario, out: &Path) -> anyhow::Result<Summary> {
    let run = sim::run_scenario(sim_cfg, s).with_context(|| format!("scenario {}", s.name))?;
    let path = out.join(format!("{}.csv", s.name));
    trace::save_trace_csv(&run.trace, &path).with_context(|| format!("writing {}", path.display()))?;
    Ok(run.summary)
}

fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let say = |text: &str| {
        if !cli.quiet {
            print!("{text}");
        }
    };
    match &cli.command {
        Command::Run { scenario } => {
            let mut cfg = ConfigFile::load(scenario)?;
            if let Some(seed) = cli.seed {
                cfg.scenario.seed = seed;
            }
            let out = out_dir(cli)?;
            let summary = fly(&cfg.sim, &cfg.scenario, out)?;
            let text = render_summaries(std::slice::from_ref(&summary), cli.format);
            let path = out.join(format!("{}_summary.{}", summary.name, extension(cli.format)));
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            say(&text);
            Ok(Outcome { crashed: summary.crashed })
        }
        Command::Suite { config } => {
            let sim_cfg = load_sim(config.as_deref())?;
            let out = out_dir(cli)?;
            let mut cases = scenario::suite();
            if let Some(seed) = cli.seed {
                cases.iter_mut().for_each(|s| s.seed = seed);
            }
            let rows = cases.par_iter().map(|s| fly(&sim_cfg, s, out)).collect::<anyhow::Result<Vec<_>>>()?;
            let text = render_summaries(&rows, cli.format);
            let path = out.join(format!("summary.{}", extension(cli.format)));
            std::fs::write(&path, &text).with_context(|| format!("writing {}", path.display()))?;
            say(&text);
            Ok(Outcome { crashed: rows.iter().any(|r| r.crashed) })
        }
        Command::Wrench { config, samples, airspeed } => {
            let cfg = ConfigFile::load(config)?;
            if *samples == 0 {
                return Err(CliError::Usage("--samples must be at least 1".into()));
            }
            let out = out_dir(cli)?;
            let report = wrench_report(&cfg, *samples, *airspeed, cli.seed.unwrap_or(cfg.scenario.seed), out)?;
            let path = out.join("wrench_report.txt");
            std::fs::write(&path, &report).with_context(|| format!("writing {}", path.display()))?;
            say(&report);
            Ok(Outcome { crashed: false })
        }
        Command::Trim { phase, airspeed, config } => {
            let sim_cfg = load_sim(config.as_deref())?;
            let phase = match phase {
                TrimKind::Hover => TrimPhase::Hover,
                TrimKind::Cruise => TrimPhase::Cruise { airspeed: *airspeed },
            };
            let t = find_trim(phase, &sim_cfg.vehicle).context("trim search")?;
            let (name, speed) = match phase {
                TrimPhase::Hover => ("hover", 0.0),
                TrimPhase::Cruise { airspeed } => ("cruise", airspeed),
            };
            let mut keys = vec![
                ("phase".to_string(), name.to_string()),
                ("airspeed_mps".into(), format!("{speed:?}")),
                ("pitch_rad".into(), format!("{:?}", t.pitch())),
                ("residual".into(), format!("{:e}", t.residual)),
            ];
            keys.extend(ACTUATOR_NAMES.iter().enumerate().map(|(i, n)| (n.to_string(), format!("{:?}", t.u[i]))));
            let text = match cli.format {
                Format::Kv => keys.iter().map(|(k, v)| format!("{k} = {v}\n")).collect(),
                Format::Csv => {
                    let (k, v): (Vec<_>, Vec<_>) = keys.into_iter().unzip();
                    format!("{}\n{}\n", k.join(","), v.join(","))
                }
            };
            say(&text);
            Ok(Outcome { crashed: false })
        }
        Command::Plot { scenario, channels } => {
            let valid = trace::trace_columns();
            if let Some(bad) = channels.iter().find(|c| !valid.contains(c)) {
                return Err(CliError::Usage(format!("unknown channel {bad:?}; valid channels: {}", valid.join(", "))));
            }
            let mut cfg = ConfigFile::load(scenario)?;
            if let Some(seed) = cli.seed {
                cfg.scenario.seed = seed;
            }
            if channels.is_empty() {
                return Ok(Outcome { crashed: false });
            }
            let out = out_dir(cli)?;
            let run = sim::run_scenario(&cfg.sim, &cfg.scenario).context("simulation")?;
            let paths = trace::emit_plotdata(&run.trace, channels, out).map_err(anyhow::Error::from)?;
            let listing: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
            say(&listing);
            Ok(Outcome { crashed: run.summary.crashed })
        }
        Command::Config { file } => {
            let cfg = match file {
                Some(p) => ConfigFile::load(p)?,
                None => ConfigFile::default(),
            };
            say(&cfg.to_text());
            Ok(Outcome { crashed: false })
        }
    }
}

fn wrench_report(cfg: &ConfigFile, samples: usize, airspeed: f64, seed: u64, out: &Path) -> anyhow::Result<String> {
    let vehicle = cfg.vehicle();
    let failure = cfg.scenario.failures.first().map(|f| ActuatorFailure { index: f.index, lock_value: f.lock_value });
    let mut cases: Vec<(String, Option<ActuatorFailure>)> = vec![("nominal".into(), None)];
    if let Some(f) = failure {
        cases.push((format!("{}_locked", ACTUATOR_NAMES[f.index]), Some(f)));
    }
    let mut report = String::new();
    for (label, failed) in &cases {
        for (tag, wc) in [("multirotor", WrenchConfig::Multirotor), ("fixed_wing", WrenchConfig::FixedWing { airspeed })] {
            let sample = wrench_space::sample_wrench_set(vehicle, wc, failed.as_ref(), samples, seed)?;
            let path = out.join(format!("wrench_{tag}_{label}.csv"));
            wrench_space::export_wrench_cloud(&sample, &path).with_context(|| format!("writing {}", path.display()))?;
            let _ = writeln!(report, "[{label}] cloud_{tag} = {}", path.display());
        }
        for allow_tilt in [false, true] {
            let h = wrench_space::static_hover_check(vehicle, failed.as_ref(), allow_tilt)?;
            for line in h.to_string().lines() {
                let _ = writeln!(report, "[{label}] hover.{line}");
            }
        }
        let c = wrench_space::cruise_check(vehicle, failed.as_ref(), airspeed)?;
        for line in c.to_string().lines() {
            let _ = writeln!(report, "[{label}] cruise.{line}");
        }
    }
    Ok(report)
}
