//! `satent`: evaluate, sweep, validate or simulate a distribution setup
//! described by a TOML config, writing CSV.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use satent::config::{parse_config, RunConfig};
use satent::report::{evaluate_rows, mc_rows, sweep_rows, to_csv, validate_rows, write_results, ResultRow};

const EXIT_FAILURE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "satent", version, about = "Rate and fidelity of satellite entanglement distribution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analytic metrics at the configured operating point.
    Evaluate(Common),
    /// Optimize λ (and the qubit cutoff) over the sweep grid.
    Sweep(Common),
    /// Analytic and Monte Carlo rows side by side with an agreement flag.
    Validate(Common),
    /// Monte Carlo estimates at the configured operating point.
    Mc(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file. Absent keys take the reference parameters.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV destination, overriding `[output] path`. Standard output if neither is set.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Overrides `[rng] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[montecarlo] trials`.
    #[arg(long)]
    trials: Option<u64>,
    /// Exit with status 2 when no row is feasible.
    #[arg(long)]
    fail_on_infeasible: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig, String> {
        let text = match &self.config {
            Some(p) => std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?,
            None => String::new(),
        };
        let mut cfg = parse_config(&text).map_err(|e| e.to_string())?;
        if let Some(s) = self.seed {
            cfg.rng.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.montecarlo.trials = t;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

type RowBuilder = fn(&RunConfig) -> satent::Result<Vec<ResultRow>>;

fn run(command: &Command) -> Result<u8, String> {
    let (opts, build): (&Common, RowBuilder) = match command {
        Command::Evaluate(o) => (o, evaluate_rows),
        Command::Sweep(o) => (o, sweep_rows),
        Command::Validate(o) => (o, validate_rows),
        Command::Mc(o) => (o, mc_rows),
    };
    let cfg = opts.load()?;
    for w in cfg.memory.warnings() {
        eprintln!("warning: {w}");
    }
    let rows = build(&cfg).map_err(|e| e.to_string())?;
    match &cfg.output {
        Some(path) => write_results(&rows, path).map_err(|e| e.to_string())?,
        None => {
            let bytes = to_csv(&rows).map_err(|e| e.to_string())?;
            std::io::stdout().write_all(&bytes).map_err(|e| e.to_string())?;
        }
    }
    if rows.iter().any(|r| r.agreement == Some(false)) {
        eprintln!("Monte Carlo and analytic values disagree beyond 3 standard errors");
        return Ok(EXIT_FAILURE);
    }
    if opts.fail_on_infeasible && !rows.iter().any(|r| r.feasible) {
        eprintln!("no feasible operating point");
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
