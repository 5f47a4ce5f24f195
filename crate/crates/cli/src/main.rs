//! Command-line front end: direct solves, path generation and assignment,
//! k-shortest-path listings and equilibrium checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Status;

#[derive(Debug, Parser)]
#[command(name = "mixflow", version, about = "Mixed RV/AV stochastic traffic assignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand. Flags override config file values.
#[derive(Debug, Args)]
struct Common {
    /// Config file (defaults to $MIXFLOW_CONFIG when set).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// TNTP net file.
    #[arg(long)]
    net: Option<PathBuf>,
    /// TNTP trips file.
    #[arg(long)]
    trips: Option<PathBuf>,
    /// Built-in network with seeded demand: nguyen or sioux-falls.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Step rule: modified or baseline.
    #[arg(long)]
    mode: Option<String>,
    /// Relative gap tolerance.
    #[arg(long)]
    gap: Option<f64>,
    /// Paths per (OD, class).
    #[arg(long, short)]
    k: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Any config key, as KEY=VALUE. Repeatable; applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut push = |key: &str, value: Option<String>| {
            if let Some(v) = value {
                out.push(format!("{key}={v}"));
            }
        };
        push("net", self.net.as_ref().map(|p| p.display().to_string()));
        push("trips", self.trips.as_ref().map(|p| p.display().to_string()));
        push("fixture", self.fixture.clone());
        push("seed", self.seed.map(|v| v.to_string()));
        push("out", self.out.as_ref().map(|p| p.display().to_string()));
        push("mode", self.mode.clone());
        push("gap", self.gap.map(|v| v.to_string()));
        push("k", self.k.map(|v| v.to_string()));
        push("threads", self.threads.map(|v| v.to_string()));
        out.extend(self.set.iter().cloned());
        out
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium on the k cheapest free-flow paths of every OD and class.
    Solve(Common),
    /// Path generation and assignment.
    Pga(Common),
    /// List the k cheapest loop-free paths between two nodes at free-flow cost.
    Ksp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        origin: u32,
        #[arg(long)]
        dest: u32,
        /// Vehicle class whose link costs are used: rv or av.
        #[arg(long, default_value = "rv")]
        class: String,
    },
    /// Certify path flows written by solve or pga.
    Check {
        #[command(flatten)]
        common: Common,
        /// Path-flow CSV.
        #[arg(long)]
        flows: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Solve(common) => {
            commands::load(common.config.as_deref(), &common.overrides()).and_then(|c| commands::solve(&c))
        }
        Command::Pga(common) => {
            commands::load(common.config.as_deref(), &common.overrides()).and_then(|c| commands::pga(&c))
        }
        Command::Ksp {
            common,
            origin,
            dest,
            class,
        } => commands::load(common.config.as_deref(), &common.overrides())
            .and_then(|c| commands::ksp(&c, *origin, *dest, class)),
        Command::Check { common, flows } => {
            commands::load(common.config.as_deref(), &common.overrides()).and_then(|c| commands::check(&c, flows))
        }
    };
    match result {
        Ok(status) => ExitCode::from(status as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::InputError as u8)
        }
    }
}
