use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use ckm_flag_cli::{run, Command, Format, RunConfig};
use clap::Parser;

/// Flag-manifold CKM toolkit.
#[derive(Debug, Parser)]
#[command(name = "ckm-flag", version)]
struct Args {
    /// Subcommand to run (omit when --config supplies one).
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON config file with the same fields as the flags; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Tolerance override, `KEY=VALUE`; repeatable.
    #[arg(long, value_parser = parse_override)]
    tolerance: Vec<(String, f64)>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Random draws per check in self-check.
    #[arg(long)]
    samples: Option<usize>,
}

fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{k}: {e}"))?;
    Ok((k.to_string(), v))
}

fn config_from(args: Args) -> Result<RunConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let c = RunConfig::from_json(&text).map_err(|e| e.to_string())?;
            if let Some(cmd) = args.command {
                if cmd != c.command {
                    return Err(format!(
                        "command {cmd:?} conflicts with config command {:?}",
                        c.command
                    ));
                }
            }
            c
        }
        None => RunConfig::new(args.command.ok_or("a command is required")?),
    };
    if args.input.is_some() {
        config.input_path = args.input;
    }
    if args.output.is_some() {
        config.output_path = args.output;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.n.is_some() {
        config.n = args.n;
    }
    if let Some(f) = args.format {
        config.format = f;
    }
    if let Some(s) = args.samples {
        config.samples = s;
    }
    config
        .tolerance
        .extend(args.tolerance.into_iter().collect::<BTreeMap<_, _>>());
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match config_from(args) {
        Ok(config) => ExitCode::from(run(&config) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
