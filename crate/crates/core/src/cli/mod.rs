//! The `mdlab` command line: `run`, `suite` and `dump-dist`.

pub mod config;
pub mod experiment;
pub mod suite;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::stein::fmt17;
use config::{ExperimentConfig, Format};
use experiment::{evaluate, model_law, Sampling};
use suite::{run_suite, SuiteSize};

#[derive(Debug, Parser)]
#[command(
    name = "mdlab",
    version,
    about = "Moderate-deviation laboratory for Stein identities"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ratio table and diagnostics for one model.
    Run(RunArgs),
    /// The diagnostics matrix over all models.
    Suite(SuiteArgs),
    /// Write the exact law a run would tabulate.
    DumpDist(DumpArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `mc.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output.path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table format; overrides `output.format`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Sampling workers; overrides `workers`.
    #[arg(long, env = "MDLAB_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(value_enum, default_value = "smoke")]
    pub size: SuiteSize,
    /// Seed for the random arrays of the combinatorial member.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "mdlab-suite")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(args: &RunArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let workers = args.workers.or(cfg.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::domain("MDLAB_WORKERS must be >= 1"));
    }
    let sampling = cfg.mc.as_ref().map(|mc| Sampling {
        seed: args.seed.unwrap_or(mc.seed),
        samples: mc.samples,
        burnin: mc.burnin,
        workers,
    });
    let outcome = evaluate(&cfg, sampling)?;
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.path.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    match args.format.unwrap_or(cfg.output.format) {
        Format::Csv => std::fs::write(dir.join("ratio_table.csv"), outcome.table.to_csv())?,
        Format::Json => std::fs::write(
            dir.join("ratio_table.json"),
            serde_json::to_string_pretty(&outcome.table)?,
        )?,
    }
    std::fs::write(
        dir.join("diagnostics.json"),
        serde_json::to_string_pretty(&outcome.report)?,
    )?;
    if !outcome.report.pass {
        eprintln!(
            "mdlab: diagnostics did not pass; see {}",
            dir.join("diagnostics.json").display()
        );
    }
    Ok(())
}

fn dump(args: &DumpArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let law = model_law(&cfg)?;
    let text = match args.format {
        Format::Json => {
            let plain = crate::dist::ExactDistribution::from_log_weights(law.iter())?;
            serde_json::to_string(&plain)? + "\n"
        }
        Format::Csv => {
            let mut s = String::from("x,logp\n");
            for (x, l) in law.iter() {
                s.push_str(&format!("{},{}\n", fmt17(x), fmt17(l)));
            }
            s
        }
    };
    write_out(args.out.as_deref(), &text)
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run(a),
        Command::DumpDist(a) => dump(a),
        Command::Suite(a) => match run_suite(a.size, a.seed, &a.out) {
            Ok(s) if s.pass => Ok(()),
            Ok(s) => {
                for e in s.entries.iter().filter(|e| !e.pass) {
                    eprintln!("mdlab: suite member {} failed", e.model);
                }
                return 1;
            }
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mdlab: {e}");
            e.exit_code()
        }
    }
}
