//! `hybridshape` command line: reconstruction, topology repair, registration,
//! evaluation and the 2D contour toy.

mod commands;
mod config;
mod manifest;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{describe, Key, Settings};
use manifest::RunManifest;

/// Bad command line or configuration (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_HELP: &str = "Exit codes: 0 success, 1 usage or IO error, 2 numerical failure, 3 topology correction failed.\n\
Thread count: HYBRIDSHAPE_THREADS (default: all cores). Logging: RUST_LOG.";

#[derive(Parser, Debug)]
#[command(name = "hybridshape", version, about = "Hybrid explicit/implicit shape reconstruction", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every configurable command.
#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit oriented points to a target, extract a mesh, repair its topology and score it
    #[command(after_help = keys_help(commands::RECONSTRUCT_KEYS))]
    Reconstruct {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fixture: Option<String>,
        /// HGRD target indicator (overrides --fixture)
        #[arg(long = "target-grid")]
        target_grid: Option<String>,
        #[arg(long)]
        res: Option<String>,
        #[arg(long)]
        iterations: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Repair the genus of a mesh using its indicator grid
    #[command(after_help = keys_help(commands::TOPOFIX_KEYS))]
    Topofix {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        tau: Option<String>,
        #[arg(long = "smooth-std")]
        smooth_std: Option<String>,
        #[arg(long = "reg-iters")]
        reg_iters: Option<String>,
        #[arg(long = "reg-lr")]
        reg_lr: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Register a source surface onto a target with a stationary velocity field
    /// (OBJ/PLY meshes, or .loops contours)
    #[command(after_help = keys_help(commands::REGISTER_KEYS))]
    Register {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iterations: Option<String>,
        #[arg(long)]
        lr: Option<String>,
        #[arg(long)]
        gradient: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Score a predicted mesh against ground truth (ASSD, HD90, NC, SI)
    #[command(after_help = keys_help(commands::EVAL_KEYS))]
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Also write metrics.csv and a manifest here
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        samples: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// 2D contour toy: explicit deformation baseline versus oriented points
    #[command(after_help = keys_help(commands::TOY2D_KEYS))]
    Toy2d {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write an analytic fixture as an HGRD grid and its extracted mesh
    #[command(after_help = keys_help(commands::GRIDGEN_KEYS))]
    Gridgen {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fixture: Option<String>,
        #[arg(long)]
        res: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Rerun a recorded manifest.json
    Replay {
        manifest: PathBuf,
        /// Output directory (default: the recorded one)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn keys_help(keys: &[Key]) -> String {
    format!("Configuration keys (--config FILE / --set KEY=VALUE):\n{}\n{EXIT_HELP}", describe(keys))
}

fn settings(keys: &[Key], common: &Common, flags: &[(&str, Option<String>)]) -> Result<Settings> {
    let mut all = flags.to_vec();
    all.push(("seed", common.seed.clone()));
    Settings::resolve(keys, common.config.as_deref(), &common.set, &all)
}

fn finish(m: RunManifest, out: &Path) -> Result<()> {
    let path = m.write_atomic(out)?;
    log::info!("stage=done manifest={}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Reconstruct { out, fixture, target_grid, res, iterations, common } => {
            let s = settings(
                commands::RECONSTRUCT_KEYS,
                &common,
                &[("fixture", fixture), ("target_grid", target_grid), ("res", res), ("iterations", iterations)],
            )?;
            finish(commands::reconstruct(&s, &out)?, &out)
        }
        Command::Topofix { grid, mesh, out, tau, smooth_std, reg_iters, reg_lr, common } => {
            let s = settings(
                commands::TOPOFIX_KEYS,
                &common,
                &[("tau", tau), ("smooth_std", smooth_std), ("reg_iters", reg_iters), ("reg_lr", reg_lr)],
            )?;
            finish(commands::topofix(&s, &grid, &mesh, &out)?, &out)
        }
        Command::Register { source, target, out, iterations, lr, gradient, common } => {
            let s = settings(
                commands::REGISTER_KEYS,
                &common,
                &[("iterations", iterations), ("lr", lr), ("gradient", gradient)],
            )?;
            finish(commands::register(&s, &source, &target, &out)?, &out)
        }
        Command::Eval { pred, gt, out, samples, common } => {
            let s = settings(commands::EVAL_KEYS, &common, &[("samples", samples)])?;
            match (commands::eval(&s, &pred, &gt, out.as_deref())?, out) {
                (Some(m), Some(out)) => finish(m, &out),
                _ => Ok(()),
            }
        }
        Command::Toy2d { out, common } => {
            let s = settings(commands::TOY2D_KEYS, &common, &[])?;
            finish(commands::toy2d(&s, &out)?, &out)
        }
        Command::Gridgen { out, fixture, res, config, set } => {
            let s = Settings::resolve(commands::GRIDGEN_KEYS, config.as_deref(), &set, &[("fixture", fixture), ("res", res)])?;
            finish(commands::gridgen(&s, &out)?, &out)
        }
        Command::Replay { manifest, out } => {
            let m = RunManifest::load(&manifest)?;
            let out = match out {
                Some(o) => o,
                None => m
                    .outputs
                    .values()
                    .next()
                    .and_then(|p| p.parent())
                    .map(Path::to_path_buf)
                    .unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf()),
            };
            let args = m.replay_args(&out);
            log::info!("stage=replay command={} out={}", m.command, out.display());
            let cli = Cli::try_parse_from(std::iter::once("hybridshape".to_string()).chain(args))
                .map_err(|e| UsageError(format!("manifest does not replay: {e}")))?;
            if matches!(cli.command, Command::Replay { .. }) {
                return Err(UsageError("a manifest cannot replay another replay".into()).into());
            }
            run(cli)
        }
    }
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(buf, "level={} target={} {}", record.level().as_str().to_lowercase(), record.target(), record.args())
        })
        .init();
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("HYBRIDSHAPE_THREADS") else { return Ok(()) };
    let n: usize = raw.trim().parse().map_err(|_| UsageError(format!("HYBRIDSHAPE_THREADS must be a count, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| UsageError(e.to_string()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    init_logging();
    match init_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("error=\"{e:#}\"");
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
