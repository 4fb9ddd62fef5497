use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zrp_cli::{exit, parse_config, run, Mode};

#[derive(Parser)]
#[command(name = "zrp", version, about = "Zero-range-potential scattering runs from a TOML config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Literal,
    Resolved,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured task and write CSV, plot script and warnings.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Worker threads (default: all cores). Output does not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Final-channel momentum convention; overrides the config's `mode`.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf, mode: Option<Mode>) -> Result<zrp_cli::RunConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(exit::CONFIG)
    })?;
    parse_config(&text, mode).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(exit::CONFIG)
    })
}

fn main() -> ExitCode {
    // clap's own usage-error code would collide with the runtime code
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::CONFIG } else { exit::OK });
        }
    };
    match cli.command {
        Command::Validate { config } => match load(&config, None) {
            Ok(cfg) => {
                println!("{}: ok (task {})", config.display(), cfg.task.name());
                ExitCode::from(exit::OK)
            }
            Err(code) => code,
        },
        Command::Run {
            config,
            out,
            threads,
            mode,
        } => {
            let mode = mode.map(|m| match m {
                ModeArg::Literal => Mode::Literal,
                ModeArg::Resolved => Mode::Resolved,
            });
            let cfg = match load(&config, mode) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if threads == Some(0) {
                eprintln!("error: --threads must be at least 1");
                return ExitCode::from(exit::CONFIG);
            }
            match run(&cfg, &out, threads) {
                Ok(o) => {
                    println!("wrote {}", o.written.csv.display());
                    if o.written.warning_count > 0 {
                        eprintln!("{} warning(s), see {}", o.written.warning_count, o.written.warnings.display());
                    }
                    if o.failed_points > 0 {
                        eprintln!("error: {} grid point(s) failed, see {}", o.failed_points, o.written.warnings.display());
                        return ExitCode::from(exit::RUNTIME);
                    }
                    ExitCode::from(exit::OK)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit::RUNTIME)
                }
            }
        }
    }
}
