use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mcflab::config::{apply_override, from_table, to_table};
use mcflab::session::{load_config, output_root};
use mcflab::{presets, resume, run_experiment, ExperimentConfig, Outcome};

/// Mean curvature flow experiments from TOML configs or built-in presets.
///
/// Exit status: 0 when every assertion passes, 1 on an assertion failure,
/// 2 on an execution error. Output goes below $MCFLAB_OUTPUT_ROOT
/// (default ./mcflab-out).
#[derive(Parser)]
#[command(name = "mcflab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more config files; independent runs execute concurrently.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a built-in preset.
    Preset {
        name: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Print the resolved config as TOML instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Continue an interrupted run from its checkpoint.
    Resume { checkpoint: PathBuf },
    /// List the built-in presets.
    ListPresets,
    /// Check config files without running them.
    Validate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

fn summarize(label: &str, outcome: &Outcome) {
    match outcome {
        Outcome::Paused { checkpoint, frame, time } => {
            println!(
                "{label}: paused in the {} run at time {time}; resume with `mcflab resume {}`",
                frame.name(),
                checkpoint.display()
            );
        }
        Outcome::AlreadyComplete { dir, passed } => {
            println!("{label}: already complete in {} ({})", dir.display(), if *passed { "PASS" } else { "FAIL" });
        }
        Outcome::Complete { dir, report } => {
            for a in &report.assertions {
                println!("{label}: [{}] {}: {}", if a.pass { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            let verdict = if report.passed { "PASS" } else { "FAIL" };
            println!("{label}: {verdict} in {:.1}s, outputs in {}", report.wall_seconds, dir.display());
        }
    }
}

fn run_one(label: &str, cfg: &ExperimentConfig) -> u8 {
    match run_experiment(cfg, &output_root()).with_context(|| format!("run `{}` failed", cfg.name)) {
        Ok(outcome) => {
            summarize(label, &outcome);
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("{label}: error: {e:#}");
            2
        }
    }
}

fn preset_config(name: &str, overrides: &[String]) -> anyhow::Result<ExperimentConfig> {
    let mut table = to_table(&presets::find(name)?.config())?;
    for ov in overrides {
        apply_override(&mut table, ov)?;
    }
    let cfg = from_table(table)?;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::ListPresets => {
            for p in presets::PRESETS {
                println!("{:<18} {}", p.name, p.summary);
            }
            Ok(0)
        }
        Command::Validate { configs } => {
            let mut code = 0;
            for path in configs {
                match load_config(&path, &[]) {
                    Ok(cfg) => println!("{}: ok ({})", path.display(), cfg.name),
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        code = 2;
                    }
                }
            }
            Ok(code)
        }
        Command::Preset { name, overrides, print } => {
            let cfg = preset_config(&name, &overrides)?;
            if print {
                print!("{}", cfg.to_toml()?);
                return Ok(0);
            }
            Ok(run_one(&cfg.name, &cfg))
        }
        Command::Resume { checkpoint } => {
            let outcome = resume(&checkpoint).with_context(|| format!("resuming {}", checkpoint.display()))?;
            summarize(&checkpoint.display().to_string(), &outcome);
            Ok(outcome.exit_code())
        }
        Command::Run { configs, overrides } => {
            let loaded = configs
                .iter()
                .map(|p| load_config(p, &overrides).with_context(|| format!("loading {}", p.display())))
                .collect::<anyhow::Result<Vec<_>>>()?;
            let codes: Vec<u8> = std::thread::scope(|scope| {
                let handles: Vec<_> = loaded.iter().map(|cfg| scope.spawn(move || run_one(&cfg.name, cfg))).collect();
                handles.into_iter().map(|h| h.join().unwrap_or(2)).collect()
            });
            Ok(codes.into_iter().max().unwrap_or(0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
