use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use atcsim_core::disturbance::policy_table;
use atcsim_core::eventlog::read_log;
use atcsim_core::experiment::{run_experiment, seed_range, ExperimentOutcome};
use atcsim_core::metrics::{compute_metrics, runs_csv, RunMetrics};
use atcsim_core::scenario::{bundled_names, ScenarioError, ScenarioFile};

#[derive(Parser)]
#[command(name = "atcsim", version, about = "Seeded multiagent ATC simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single seed.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run many seeds and aggregate.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',', conflicts_with = "runs")]
        seeds: Vec<u64>,
        /// Number of consecutive seeds starting at --seed.
        #[arg(long)]
        runs: Option<u64>,
        /// First seed when --runs is used.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Maximum concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a scenario file and report every problem.
    Validate {
        #[arg(long)]
        scenario: String,
    },
    /// Recompute metrics from a saved event log.
    Replay {
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the disturbance policies and their probabilities.
    PolicyTable {
        #[arg(long, default_value = "mumbai")]
        scenario: String,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file path or bundled name.
    #[arg(long, default_value = "mumbai")]
    scenario: String,
    /// Directory for per-seed logs, metrics and the aggregate report.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Abort a run on the first invariant violation.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

fn load(spec: &str) -> Result<ScenarioFile> {
    ScenarioFile::resolve(spec).map_err(|e| match e {
        ScenarioError::NotFound(_) => anyhow::anyhow!(
            "{e} (bundled: {})",
            bundled_names().collect::<Vec<_>>().join(", ")
        ),
        e => e.into(),
    })
}

fn print_metrics(m: &RunMetrics, format: Format) {
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(m).expect("metrics serialize")),
        Format::Csv => print!("{}", m.to_csv()),
        Format::Text => {
            println!("seed                 {}", m.seed);
            println!("scenario_hash        {}", m.scenario_hash);
            println!("movements_per_hr     {:.2}", m.movements_per_hr);
            println!("landings_per_hr      {:.2}", m.landings_per_hr);
            println!("takeoffs_per_hr      {:.2}", m.takeoffs_per_hr);
            println!("handled_fraction     {:.4}", m.handled_fraction);
            println!("handled_fraction_all {:.4}", m.handled_fraction_all);
            println!("escalations          {}", m.escalations);
            println!("diversions           {}", m.diversions);
            println!("supervision_gaps     {}", m.supervision_gaps);
            println!("failovers/failbacks  {}/{}", m.failovers, m.failbacks);
            println!("mean_holding_time_s  {:.1}", m.mean_holding_time_s);
        }
    }
}

fn report(outcome: &ExperimentOutcome, format: Format) -> ExitCode {
    if outcome.runs.len() == 1 && outcome.failures.is_empty() {
        print_metrics(&outcome.runs[0], format);
    } else if let Some(rep) = &outcome.report {
        match format {
            Format::Json => println!("{}", rep.to_json()),
            Format::Csv => print!("{}", runs_csv(&outcome.runs)),
            Format::Text => print!("{}", rep.to_text()),
        }
    }
    for f in &outcome.failures {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
    if outcome.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn experiment(common: &Common, seeds: &[u64], jobs: usize) -> Result<ExitCode> {
    let mut scenario = load(&common.scenario)?;
    if common.strict {
        scenario.strict_mode = true;
    }
    let outcome = run_experiment(&scenario, seeds, common.out_dir.as_deref(), jobs)?;
    Ok(report(&outcome, common.format))
}

fn main_inner() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { common, seed } => experiment(&common, &[seed], 1),
        Command::Experiment {
            common,
            seeds,
            runs,
            seed,
            jobs,
        } => {
            let seeds = match runs {
                Some(n) => seed_range(seed, n),
                None if seeds.is_empty() => bail!("give --seeds or --runs"),
                None => seeds,
            };
            experiment(&common, &seeds, jobs)
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("ok: {} (hash {})", if s.name.is_empty() { &scenario } else { &s.name }, s.hash());
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                eprintln!("{e}");
                Ok(ExitCode::FAILURE)
            }
        },
        Command::Replay { log, format } => {
            let file = File::open(&log).with_context(|| format!("cannot open {}", log.display()))?;
            let records = read_log(BufReader::new(file))?;
            let m = compute_metrics(&records)?;
            print_metrics(&m, format);
            Ok(ExitCode::SUCCESS)
        }
        Command::PolicyTable { scenario, format } => {
            let s = load(&scenario)?;
            let rows = policy_table(&s.causes);
            match format {
                Format::Json => {
                    let v: Vec<_> = rows
                        .iter()
                        .map(|(c, a, phases, p)| {
                            serde_json::json!({"cause": c, "policy": a, "phases": phases, "per_minute": p})
                        })
                        .collect();
                    println!("{}", serde_json::to_string_pretty(&v)?);
                }
                Format::Csv | Format::Text => {
                    let sep = if format == Format::Csv { "," } else { "  " };
                    println!("cause{sep}policy{sep}per_minute{sep}phases");
                    for (c, a, phases, p) in rows {
                        let phases: Vec<String> = phases.iter().map(|p| format!("{p:?}")).collect();
                        println!("{c:?}{sep}{a:?}{sep}{p}{sep}{}", phases.join(";"));
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
