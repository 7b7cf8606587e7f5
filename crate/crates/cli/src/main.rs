use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use abacode::harness::{
    compare, pretrain_snapshot, run_experiment, write_ranking, ExperimentConfig, CONFIG_TEMPLATE,
};
use abacode::Error;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "abacode",
    version,
    about = "Contextual bandits with adaptive context embeddings"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pre-train every (variant, seed) agent and save snapshots.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Snapshot directory [default: <out>/snapshots]
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Run the online loop and write per-round, summary and curve CSVs.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rounds: Option<u64>,
        /// Start from snapshots written by `pretrain` instead of pre-training inline.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Rank variants by mean accuracy from an earlier `run`; writes ranking.csv.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Print a commented configuration template.
    GenConfig {
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Replace the configured seed list (repeatable).
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory, overriding `run.out_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict to the named variants (repeatable).
    #[arg(long = "variant")]
    variants: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if !self.seeds.is_empty() {
            cfg.run.seeds = self.seeds.clone();
        }
        if let Some(out) = &self.out {
            cfg.run.out_dir = out.clone();
        }
        cfg.select_variants(&self.variants)?;
        Ok(cfg)
    }
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Pretrain { common, snapshot } => {
            let cfg = common.load()?;
            let dir = snapshot.unwrap_or_else(|| cfg.run.out_dir.join("snapshots"));
            for path in pretrain_snapshot(&cfg, &dir)? {
                println!("{}", path.display());
            }
        }
        Command::Run {
            common,
            rounds,
            snapshot,
        } => {
            let mut cfg = common.load()?;
            if let Some(r) = rounds {
                cfg.run.rounds = r;
            }
            if snapshot.is_some() {
                cfg.run.snapshot_dir = snapshot;
            }
            cfg.validate()?;
            println!("variant,seed,final_accuracy,total_errors");
            for r in run_experiment(&cfg)? {
                println!("{},{},{},{}", r.variant, r.seed, r.accuracy(), r.errors());
            }
        }
        Command::Compare { common } => {
            let cfg = common.load()?;
            let ranking = compare(&cfg)?;
            write_ranking(&cfg.run.out_dir, &ranking)?;
            println!("rank,variant,mean_accuracy,seeds");
            for (i, r) in ranking.iter().enumerate() {
                println!("{},{},{},{}", i + 1, r.variant, r.mean_accuracy, r.seeds);
            }
        }
        Command::GenConfig { out: Some(path) } => {
            fs::write(&path, CONFIG_TEMPLATE).map_err(|source| Error::Io { path, source })?;
        }
        Command::GenConfig { out: None } => print!("{CONFIG_TEMPLATE}"),
    }
    Ok(())
}

fn error_line(kind: &str, message: String, field: Option<String>) -> String {
    json!({ "error": { "kind": kind, "message": message, "field": field } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let rendered = e.to_string();
            eprint!("{rendered}");
            let first = rendered.lines().next().unwrap_or_default();
            let message = first.trim_start_matches("error: ").to_string();
            eprintln!("{}", error_line("usage", message, None));
            return ExitCode::from(2);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = match &e {
                Error::Config { field, msg } => {
                    error_line(e.kind(), msg.clone(), Some(field.clone()))
                }
                _ => error_line(e.kind(), e.to_string(), None),
            };
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
