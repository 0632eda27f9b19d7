//! Command-line front end: scenario runs and acceptance bundles.

pub mod config;
pub mod run;
pub mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{read_toml, Overrides, ScenarioFile, VerifyFile};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Pass = 0,
    TestFailure = 1,
    Usage = 2,
    Runtime = 3,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

#[derive(Debug, Parser)]
#[command(name = "hamlab", version, about = "Hammersley process experiments and acceptance checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario and write samples.csv and report.json.
    Run(Common),
    /// Run an acceptance bundle and print the verdict table.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Bundle name, overriding the config file.
        #[arg(long)]
        bundle: Option<String>,
        /// List the known bundles and exit.
        #[arg(long)]
        list: bool,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            env_seed: std::env::var("HAMLAB_SEED").ok(),
        }
    }
}

fn runtime_exit(e: hamlab::Error) -> Exit {
    eprintln!("error: {e}");
    match e {
        hamlab::Error::InvalidArgument(_) => Exit::Usage,
        _ => Exit::Runtime,
    }
}

pub fn main_with(cli: Cli) -> Exit {
    match cli.command {
        Command::Run(common) => {
            let Some(path) = &common.config else {
                eprintln!("error: run needs --config");
                return Exit::Usage;
            };
            let cfg = match read_toml::<ScenarioFile>(path).and_then(|f| f.resolve(&common.overrides())) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Exit::Usage;
                }
            };
            let (report, samples) = match run::run(&cfg) {
                Ok(r) => r,
                Err(e) => return runtime_exit(e),
            };
            if let Err(e) = run::write_outputs(&cfg, &report, &samples) {
                eprintln!("error: writing outputs to {}: {e}", cfg.output_path.display());
                return Exit::Runtime;
            }
            print!("{}", run::verdict_table(&report.body.verdicts));
            println!(
                "{} replicas x {} n in {:.1}s; outputs in {}",
                cfg.replicas,
                cfg.n_list.len(),
                report.timing.total_seconds,
                cfg.output_path.display()
            );
            if report.all_pass() {
                Exit::Pass
            } else {
                Exit::TestFailure
            }
        }
        Command::Verify { common, bundle, list } => {
            if list {
                for (name, criteria) in hamlab::acceptance::BUNDLES {
                    let ids: Vec<&str> = criteria.iter().map(|c| c.id()).collect();
                    println!("{name}: {}", ids.join(" "));
                }
                return Exit::Pass;
            }
            let file = match &common.config {
                Some(path) => read_toml::<VerifyFile>(path),
                None => Ok(VerifyFile::default()),
            };
            let cfg = match file.and_then(|f| f.resolve(bundle, &common.overrides())) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Exit::Usage;
                }
            };
            let report = match verify::verify(&cfg) {
                Ok(r) => r,
                Err(e) => return runtime_exit(e),
            };
            print!("{}", run::verdict_table(&report.verdicts));
            if let Some(dir) = &cfg.output_path {
                let written = std::fs::create_dir_all(dir).and_then(|_| {
                    let json = serde_json::to_string_pretty(&report).map_err(std::io::Error::other)?;
                    std::fs::write(dir.join("verify.json"), json + "\n")
                });
                if let Err(e) = written {
                    eprintln!("error: writing report to {}: {e}", dir.display());
                    return Exit::Runtime;
                }
            }
            if report.verdicts.iter().all(|v| v.pass) {
                Exit::Pass
            } else {
                Exit::TestFailure
            }
        }
    }
}
