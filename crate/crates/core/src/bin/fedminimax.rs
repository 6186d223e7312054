use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fedminimax::cli;
use fedminimax::config::{self, RunConfig, CONFIG_HELP, PRESET_NAMES};

#[derive(Parser)]
#[command(
    name = "fedminimax",
    version,
    about = "Federated minimax optimization simulator",
    after_help = CONFIG_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Source {
    /// Config file.
    #[arg(long, short, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Shipped preset (see `fedminimax presets`).
    #[arg(long, short)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured variant and seed; writes CSV traces and summary.txt.
    Run(Source),
    /// Check the hyperparameters against the convergence constraints.
    Validate {
        #[command(flatten)]
        source: Source,
        /// Print `name=satisfied|lhs|rhs` lines instead of a table.
        #[arg(long)]
        kv: bool,
    },
    /// Numeric probes of the problem's assumptions.
    Probe {
        #[command(flatten)]
        source: Source,
        /// Comma list from pl, lipschitz, gradcheck, unbiased, constants.
        #[arg(long, default_value = "pl,lipschitz,gradcheck,unbiased,constants")]
        checks: String,
    },
    /// Run all variants and print one comparison table.
    Bench(Source),
    /// Print the effective config after defaults and overrides.
    Show(Source),
    /// List the shipped presets.
    Presets,
}

type Overrides = Vec<(String, String)>;

/// Splits `--section.key value` and `--section.key=value` out of the
/// arguments; everything else goes to clap.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides), String> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--").filter(|a| a.contains('.')) {
            Some(flag) => match flag.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().ok_or_else(|| format!("missing value for --{flag}"))?;
                    overrides.push((flag.to_string(), v));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn load(source: &Source, overrides: &[(String, String)]) -> Result<RunConfig, String> {
    let text = match (&source.config, &source.preset) {
        (Some(path), _) => std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        (None, Some(name)) => config::preset_text(name)
            .ok_or_else(|| format!("unknown preset `{name}` (available: {})", PRESET_NAMES.join(", ")))?
            .to_string(),
        (None, None) => String::new(),
    };
    config::parse_config_with_overrides(&text, overrides).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    let (mut out, mut err) = (io::stdout(), io::stderr());
    let code = match &cli.command {
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            0
        }
        Command::Run(s)
        | Command::Bench(s)
        | Command::Show(s)
        | Command::Validate { source: s, .. }
        | Command::Probe { source: s, .. } => {
            let cfg = match load(s, &overrides) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            match &cli.command {
                Command::Run(_) => cli::command_run(&cfg, &mut out, &mut err),
                Command::Bench(_) => cli::command_bench(&cfg, &mut out, &mut err),
                Command::Show(_) => {
                    print!("{}", config::render_config(&cfg));
                    0
                }
                Command::Validate { kv, .. } => cli::command_validate(&cfg, *kv, &mut out, &mut err),
                Command::Probe { checks, .. } => match cli::parse_checks(checks) {
                    Ok(list) => cli::command_probe(&cfg, &list, &mut out, &mut err),
                    Err(e) => {
                        eprintln!("error: {e}");
                        2
                    }
                },
                Command::Presets => unreachable!(),
            }
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(1))
}
