use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use kstab::cli::{self, Command, Format, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    Weight,
    Classify,
    OrbitZero,
    Alldelta,
    Futaki,
    InnerProduct,
    BsSolve,
    Decay,
    Obstruction,
    Verdict,
    Sweep,
    Validate,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Fmt {
    Json,
    Csv,
}

/// Stability obstructions for cscK metrics on one-point blowups.
///
/// Exit status: 0 on success, 2 when the answer is undetermined, 1 on error.
#[derive(Parser, Debug)]
#[command(name = "kstab", version)]
struct Args {
    command: Cmd,
    /// Model JSON file.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Blowup parameter(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Perturbation grid for the orbit-zero criterion.
    #[arg(long = "delta-grid", value_delimiter = ',')]
    delta_grid: Vec<f64>,
    /// Point as JSON, e.g. '[[1,0],[0,0,1]]'; defaults to the model's point.
    #[arg(long)]
    point: Option<String>,
    /// Generator index, 'K,L', or JSON coefficient vector(s).
    #[arg(long)]
    gen: Option<String>,
    /// Complex dimension for bs-solve without a model.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Fmt,
    #[arg(long, default_value_t = cli::DEFAULT_SEED)]
    seed: u64,
}

fn config(a: Args) -> RunConfig {
    let command = match a.command {
        Cmd::Weight => Command::Weight,
        Cmd::Classify => Command::Classify,
        Cmd::OrbitZero => Command::OrbitZero,
        Cmd::Alldelta => Command::Alldelta,
        Cmd::Futaki => Command::Futaki,
        Cmd::InnerProduct => Command::InnerProduct,
        Cmd::BsSolve => Command::BsSolve,
        Cmd::Decay => Command::Decay,
        Cmd::Obstruction => Command::Obstruction,
        Cmd::Verdict => Command::Verdict,
        Cmd::Sweep => Command::Sweep,
        Cmd::Validate => Command::Validate,
    };
    RunConfig {
        command,
        model_path: a.model,
        eps: a.eps,
        delta_grid: a.delta_grid,
        point: a.point,
        gen: a.gen,
        dim: a.dim,
        out: a.out,
        format: match a.format {
            Fmt::Json => Format::Json,
            Fmt::Csv => Format::Csv,
        },
        seed: a.seed,
    }
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("KSTAB_THREADS") {
        let n: usize = v.parse().with_context(|| format!("KSTAB_THREADS={v} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn write(cfg: &RunConfig, outcome: &cli::Outcome) -> anyhow::Result<()> {
    let json = cli::render(&outcome.report);
    match (cfg.format, &cfg.out, &outcome.csv) {
        (Format::Csv, Some(path), Some(csv)) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            let side = path.with_extension("json");
            std::fs::write(&side, json).with_context(|| format!("writing {}", side.display()))?;
        }
        (Format::Csv, None, Some(csv)) => print!("{csv}"),
        (_, Some(path), _) => std::fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        (_, None, _) => print!("{json}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cfg = config(Args::parse());
    if let Err(e) = init_threads() {
        eprintln!("{e:#}");
        return ExitCode::from(1);
    }
    match cli::run(&cfg) {
        Ok(outcome) => {
            if let Err(e) = write(&cfg, &outcome) {
                let err = kstab::error::KstabError::Io(format!("{e:#}"));
                eprint!("{}", cli::render(&cli::error_report(Some(&cfg), &err)));
                return ExitCode::from(1);
            }
            let invalid =
                cfg.command == Command::Validate && outcome.report["result"]["valid"].as_bool() == Some(false);
            if invalid {
                return ExitCode::from(1);
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprint!("{}", cli::render(&cli::error_report(Some(&cfg), &e)));
            ExitCode::from(1)
        }
    }
}
