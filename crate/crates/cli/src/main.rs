// Copyright 2026 the LoewnerLab Authors
// SPDX-License-Identifier: Apache-2.0

//! `loewnerlab`: runs scenario files and records their outputs.

mod experiments;
mod scenario;

use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use scenario::{run_file, suite_files, RunSummary, SeedOverride};

#[derive(Parser)]
#[command(name = "loewnerlab", version, about = "Scenario runner for multiple SLE, driving particle systems and coupled fields")]
struct Cli {
    /// Seed for every scenario (decimal or 0x-hex); beats LOEWNERLAB_SEED and the config.
    #[arg(long, global = true, value_parser = seed_arg)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run every `*.json` scenario in a directory.
    Suite { dir: PathBuf },
    /// List the available experiments.
    List,
}

fn seed_arg(s: &str) -> Result<u64, String> {
    loewnerlab::rng::parse_seed(s).map_err(|e| e.to_string())
}

fn print_summary(s: &RunSummary) {
    let tail = s.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default();
    let word = match s.exit_code {
        0 => "ok",
        2 => "invalid",
        _ => "failed",
    };
    println!("{word:<7} {:<40} {:>8.1}s  {}{tail}", s.name, s.wall_time_s, s.dir.display());
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let seed = SeedOverride(cli.seed);
    match cli.command {
        Command::List => {
            for e in experiments::EXPERIMENTS {
                println!("{:<16} {}", e.name, e.about);
            }
            ExitCode::SUCCESS
        }
        Command::Run { config } => match run_file(&config, &cli.out, seed) {
            Ok(s) => {
                print_summary(&s);
                ExitCode::from(s.exit_code)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
        Command::Suite { dir } => {
            let files = match suite_files(&dir) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            if files.is_empty() {
                eprintln!("error: no scenario files in {}", dir.display());
                return ExitCode::from(2);
            }
            let results: Vec<_> = files.par_iter().map(|f| (f, run_file(f, &cli.out, seed))).collect();
            let mut worst = 0u8;
            let mut names = HashSet::new();
            let mut rows = Vec::new();
            for (file, r) in results {
                match r {
                    Ok(s) => {
                        print_summary(&s);
                        if !names.insert(s.name.clone()) {
                            eprintln!("warning: scenario name `{}` used twice; outputs overlap", s.name);
                        }
                        worst = worst.max(s.exit_code);
                        rows.push(json!({
                            "file": file.display().to_string(),
                            "name": s.name,
                            "status": s.status,
                            "exit_code": s.exit_code,
                            "wall_time_s": s.wall_time_s,
                        }));
                    }
                    Err(e) => {
                        eprintln!("error: {}: {e:#}", file.display());
                        worst = worst.max(1);
                    }
                }
            }
            let summary = json!({ "suite": dir.display().to_string(), "exit_code": worst, "scenarios": rows });
            let written = std::fs::create_dir_all(&cli.out).and_then(|_| {
                std::fs::write(cli.out.join("suite.json"), serde_json::to_vec_pretty(&summary).expect("json"))
            });
            if let Err(e) = written {
                eprintln!("error: writing suite.json: {e}");
                worst = worst.max(1);
            }
            ExitCode::from(worst)
        }
    }
}
