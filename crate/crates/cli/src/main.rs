use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blyap::cyclic::DEFAULT_SAMPLES;
use blyap::model::{parse_model, EnvironmentModel};
use blyap::report::{self, RunConfig, RunReport};
use blyap::sim::SimConfig;
use blyap::Error;
use clap::{Args, Parser, Subcommand};

const EXIT_USER: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// Growth-rate bounds and simulation for branching processes in a Markovian environment.
#[derive(Parser)]
#[command(name = "blyap", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Model file (JSON).
    model: PathBuf,
    /// Accept unknown fields in the model file.
    #[arg(long)]
    lax: bool,
    /// Cap the number of worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportOut {
    /// Write the JSON run report here.
    #[arg(long, value_name = "OUT")]
    json: Option<PathBuf>,
    /// Include per-stage wall-clock timings in the JSON report.
    #[arg(long)]
    timings: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a model file and summarize it.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Compute the closed-form bounds, optionally with the cyclic Monte Carlo bound.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// Also estimate the cyclic-environment lower bound.
        #[arg(long)]
        star: bool,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: ReportOut,
    },
    /// Estimate the growth rate by simulating the random matrix product.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        #[arg(long, default_value_t = 2000)]
        jumps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Tracked product entry as `i,j` (1-based).
        #[arg(long, value_parser = parse_entry, default_value = "1,1")]
        entry: (usize, usize),
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Write the Cesàro series as CSV here.
        #[arg(long, value_name = "OUT")]
        csv: Option<PathBuf>,
        #[command(flatten)]
        out: ReportOut,
    },
}

fn parse_entry(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s
        .split_once(',')
        .ok_or_else(|| format!("expected i,j, got {s:?}"))?;
    let parse = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok((parse(i)?, parse(j)?))
}

enum Failure {
    Io(String),
    Run(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Run(e)
    }
}

fn load(common: &Common) -> Result<EnvironmentModel, Failure> {
    let text = fs::read_to_string(&common.model)
        .map_err(|e| Failure::Io(format!("{}: {e}", common.model.display())))?;
    Ok(parse_model(&text, !common.lax)?)
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn summary(model: &EnvironmentModel) -> String {
    let rates: Vec<String> = model.rates().iter().map(|c| c.to_string()).collect();
    let cyclic = match model.detect_cycle() {
        Some(order) => {
            let o: Vec<String> = order.iter().map(|k| (k + 1).to_string()).collect();
            format!("yes ({})", o.join(" -> "))
        }
        None => "no".into(),
    };
    let mut s = String::new();
    if let Some(name) = model.name() {
        s += &format!("model: {name}\n");
    }
    s += &format!(
        "m = {}, r = {}\nc = ({})\ncyclic: {cyclic}\n",
        model.m(),
        model.r(),
        rates.join(", ")
    );
    s
}

fn finish(report: &RunReport, out: &ReportOut) -> Result<(), Failure> {
    print!("{}", report::format_table(report));
    if let Some(path) = &out.json {
        write(path, &report::to_json(report))?;
    }
    Ok(())
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Validate { common } => {
            let model = load(&common)?;
            print!("{}", summary(&model));
        }
        Cmd::Bounds {
            common,
            star,
            samples,
            seed,
            out,
        } => {
            let model = load(&common)?;
            let config = RunConfig {
                lax: common.lax,
                ..RunConfig::bounds(star, samples, seed)
            };
            let path = common.model.display().to_string();
            let report = report::run(&model, Some(&path), config, out.timings)?;
            finish(&report, &out)?;
        }
        Cmd::Simulate {
            common,
            paths,
            jumps,
            seed,
            entry,
            record_every,
            csv,
            out,
        } => {
            let model = load(&common)?;
            let sim = SimConfig {
                paths,
                jumps,
                seed,
                entry,
                record_every,
            };
            sim.validate(model.r())?;
            let config = RunConfig {
                lax: common.lax,
                ..RunConfig::simulate(sim)
            };
            let path = common.model.display().to_string();
            let report = report::run(&model, Some(&path), config, out.timings)?;
            if let (Some(path), Some(result)) = (&csv, &report.simulation) {
                write(path, &report::series_csv(result))?;
            }
            finish(&report, &out)?;
        }
    }
    Ok(())
}

fn threads_of(cmd: &Cmd) -> Option<usize> {
    match cmd {
        Cmd::Validate { common } | Cmd::Bounds { common, .. } | Cmd::Simulate { common, .. } => {
            common.threads
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match threads_of(&cli.command) {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cli.command)),
            Err(e) => {
                eprintln!("error: cannot start worker pool: {e}");
                return ExitCode::from(EXIT_USER);
            }
        },
        None => execute(cli.command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() {
                EXIT_USER
            } else {
                EXIT_NUMERIC
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_parsing() {
        assert_eq!(parse_entry("1,2"), Ok((1, 2)));
        assert_eq!(parse_entry(" 3 , 4 "), Ok((3, 4)));
        assert!(parse_entry("1").is_err());
        assert!(parse_entry("a,1").is_err());
        assert!(parse_entry("-1,1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
