//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::metrics::{
    aggregate, write_per_user_csv, MetricsOptions, RateDenominator, SummaryReport,
};
use crate::model::{builtin_scenario, validate_scenario, ScenarioConfig, Violation};
use crate::output::{write_atomic, write_string};
use crate::scenario_file::{parse_scenario, scenario_to_text};
use crate::sim::{run, RunOptions, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "oppsim",
    version,
    about = "Reaction-aware opportunistic network simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one or more replications of a scenario.
    Run(RunArgs),
    /// Check a scenario file and print every violation.
    Validate {
        /// Scenario file to check.
        path: PathBuf,
    },
    /// Write a built-in preset as a scenario file.
    DumpPreset {
        /// Preset name: jodel, city-events or emergency.
        name: String,
        /// Destination file; stdout when omitted.
        path: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Built-in preset to run.
    #[arg(
        long,
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    preset: Option<String>,
    /// Scenario file to run.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Master seed; replication k uses seed + k.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of replications.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    reps: u32,
    /// Override the user count.
    #[arg(long)]
    users: Option<usize>,
    /// Override the run horizon, in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Write events.csv (every delivery and injection).
    #[arg(long)]
    dump_events: bool,
    /// Write trace.csv (every mobility waypoint).
    #[arg(long)]
    dump_trace: bool,
    /// Write precompute.csv (the per-pair reaction table).
    #[arg(long)]
    dump_precompute: bool,
    /// Restrict the emergency schedule to exactly one message.
    #[arg(long)]
    single_emergency: bool,
    /// Delivery rate denominator over all (user, message) pairs instead of wanted pairs.
    #[arg(long)]
    all_pairs: bool,
    /// Leave each origin's own reception out of its metrics.
    #[arg(long)]
    exclude_self: bool,
    /// Run replications one at a time instead of in parallel.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug)]
enum Failure {
    User(String),
    Invalid(Vec<Violation>),
    Io(String),
}

impl Failure {
    fn io(context: &Path, e: io::Error) -> Self {
        Failure::Io(format!("{}: {e}", context.display()))
    }

    fn report(self) -> i32 {
        match self {
            Failure::User(msg) => {
                eprintln!("error: {msg}");
                EXIT_USER
            }
            Failure::Invalid(vs) => {
                eprintln!("{}", violation_text(&vs));
                EXIT_USER
            }
            Failure::Io(msg) => {
                eprintln!("I/O error: {msg}");
                EXIT_IO
            }
        }
    }
}

fn violation_text(vs: &[Violation]) -> String {
    let mut s = format!("{} violation(s):", vs.len());
    for v in vs {
        let _ = write!(s, "\n  {}: {}", v.path, v.message);
    }
    s
}

/// Parses `args` (including the program name) and executes the command.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USER } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Validate { path } => cmd_validate(&path),
        Command::DumpPreset { name, path } => cmd_dump(&name, path.as_deref()),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => f.report(),
    }
}

fn load_file(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    parse_scenario(&text).map_err(|e| Failure::User(format!("{}: {e}", path.display())))
}

fn cmd_validate(path: &Path) -> Result<(), Failure> {
    let cfg = load_file(path)?;
    let vs = validate_scenario(&cfg);
    if vs.is_empty() {
        println!("{}: ok", path.display());
        Ok(())
    } else {
        Err(Failure::Invalid(vs))
    }
}

fn cmd_dump(name: &str, path: Option<&Path>) -> Result<(), Failure> {
    let cfg = builtin_scenario(name).map_err(|e| Failure::User(e.to_string()))?;
    let text = scenario_to_text(&cfg);
    match path {
        Some(p) => write_string(p, &text).map_err(|e| Failure::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn scenario_for(a: &RunArgs) -> Result<ScenarioConfig, Failure> {
    let mut cfg = match (&a.preset, &a.scenario) {
        (Some(name), _) => builtin_scenario(name).map_err(|e| Failure::User(e.to_string()))?,
        (None, Some(path)) => load_file(path)?,
        (None, None) => {
            return Err(Failure::User(
                "one of --preset or --scenario is required".into(),
            ))
        }
    };
    if let Some(seed) = a.seed {
        cfg.master_seed = seed;
    }
    if let Some(n) = a.users {
        cfg.user_count = n;
    }
    if let Some(h) = a.horizon {
        cfg.run_horizon = h;
    }
    if a.single_emergency {
        cfg.single_emergency = true;
    }
    let vs = validate_scenario(&cfg);
    if vs.is_empty() {
        Ok(cfg)
    } else {
        Err(Failure::Invalid(vs))
    }
}

fn write_rep(
    dir: &Path,
    a: &RunArgs,
    cfg: &ScenarioConfig,
    out: &RunOutput,
) -> Result<(), Failure> {
    let io = |name: &str| {
        let p = dir.join(name);
        move |e| Failure::io(&p, e)
    };
    let summary = json!({
        "scenario": cfg.name,
        "seed": out.seed,
        "report": out.summary,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_string(&dir.join("summary.json"), &text).map_err(io("summary.json"))?;
    write_atomic(&dir.join("per_user.csv"), |w| {
        write_per_user_csv(&out.summary.per_user, w)
    })
    .map_err(io("per_user.csv"))?;
    write_atomic(&dir.join("schedule.csv"), |w| out.schedule.write_csv(w))
        .map_err(io("schedule.csv"))?;
    if a.dump_events {
        write_atomic(&dir.join("events.csv"), |w| out.write_events_csv(w))
            .map_err(io("events.csv"))?;
    }
    if a.dump_trace {
        write_atomic(&dir.join("trace.csv"), |w| out.write_trace_csv(w))
            .map_err(io("trace.csv"))?;
    }
    if a.dump_precompute {
        write_atomic(&dir.join("precompute.csv"), |w| out.table.write_csv(w))
            .map_err(io("precompute.csv"))?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.4}"))
}

fn print_table(cfg: &ScenarioConfig, seeds: &[u64], reports: &[SummaryReport]) {
    println!(
        "scenario {} ({} users, {} s)",
        cfg.name, cfg.user_count, cfg.run_horizon
    );
    println!(
        "{:>6} {:>20} {:>9} {:>10} {:>12} {:>12} {:>7}",
        "rep", "seed", "messages", "delivery", "delay_mean", "overhead%", "angry"
    );
    for (k, (seed, r)) in seeds.iter().zip(reports).enumerate() {
        println!(
            "{:>6} {:>20} {:>9} {:>10} {:>12} {:>12} {:>7}",
            k,
            seed,
            r.message_count,
            fmt_opt(r.delivery_rate),
            fmt_opt(r.delay_mean_s),
            fmt_opt(r.overhead_mean_pct),
            r.angry_count
        );
    }
}

fn cmd_run(a: &RunArgs) -> Result<(), Failure> {
    let base = scenario_for(a)?;
    let opts = RunOptions {
        record_trace: a.dump_trace,
        metrics: MetricsOptions {
            denominator: if a.all_pairs {
                RateDenominator::AllPairs
            } else {
                RateDenominator::Wanted
            },
            include_self: !a.exclude_self,
        },
        ..RunOptions::default()
    };
    fs::create_dir_all(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    let seeds: Vec<u64> = (0..a.reps as u64)
        .map(|k| base.master_seed.wrapping_add(k))
        .collect();
    let one = |k: usize| -> Result<SummaryReport, Failure> {
        let mut cfg = base.clone();
        cfg.master_seed = seeds[k];
        let out = run(&cfg, opts).map_err(Failure::Invalid)?;
        write_rep(&a.out.join(format!("rep-{k}")), a, &cfg, &out)?;
        Ok(out.summary)
    };
    let results: Vec<Result<SummaryReport, Failure>> = if a.sequential || seeds.len() == 1 {
        (0..seeds.len()).map(one).collect()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..seeds.len()).map(|k| s.spawn(move || one(k))).collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("replication thread panicked"))
                .collect()
        })
    };
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let agg = aggregate(&seeds, &reports);
    let text = serde_json::to_string_pretty(&agg).expect("aggregate serializes");
    let agg_path = a.out.join("aggregate.json");
    write_string(&agg_path, &text).map_err(|e| Failure::io(&agg_path, e))?;
    print_table(&base, &seeds, &reports);
    for (name, ci) in &agg.metrics {
        if let Some(ci) = ci {
            match ci.half_width {
                Some(hw) => println!(
                    "{name:>18}: {:.4} ± {:.4} (95% CI, n={})",
                    ci.mean, hw, ci.n
                ),
                None => println!("{name:>18}: {:.4} (n={})", ci.mean, ci.n),
            }
        }
    }
    Ok(())
}
