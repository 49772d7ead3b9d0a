//! `ucip`: run the detection experiments and write their artifacts.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{error::ErrorKind, Parser, Subcommand, ValueEnum};

use ucip_core::harness::experiments as ex;
use ucip_core::harness::{report, ExperimentConfig, OutputSink};

const EXIT_WITHHELD: u8 = 2;
const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 64;

#[derive(Parser, Debug)]
#[command(name = "ucip", version, about = "Detect terminal versus instrumental continuation objectives in agent trajectories")]
struct Cli {
    /// Master seed; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML experiment config.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (default: runs/<command>).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also emit plot-ready CSV tables where a command has them.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the Phase-I trajectory dataset.
    Generate,
    /// Train the shared QBM on the Phase-I dataset.
    Train,
    /// Full Phase-I detection with temporal, counterfactual and cross-agent passes.
    Phase1,
    /// EPS and PRI over the window sweep.
    Temporal,
    /// Counterfactual divergence and ARS.
    Counterfactual,
    /// CLMP matrix and ECI.
    CrossAgent,
    /// False-positive rates of adversarial agents.
    Adversarial,
    /// Classical latent-model baselines.
    Baselines,
    /// Hidden-dimension sweep.
    SweepDim,
    /// Grid-size and memory-length sweeps.
    SweepGrid,
    /// Type A / Type B interpolation sweep.
    SweepAlpha,
    /// Zero-shot corridor transfer.
    Transfer,
    /// Print a text summary of a run directory.
    Report {
        dir: PathBuf,
    },
}

impl Command {
    fn dir_name(&self) -> &'static str {
        match self {
            Command::Generate => "generate",
            Command::Train => "train",
            Command::Phase1 => "phase1",
            Command::Temporal => "temporal",
            Command::Counterfactual => "counterfactual",
            Command::CrossAgent => "cross_agent",
            Command::Adversarial => "adversarial",
            Command::Baselines => "baselines",
            Command::SweepDim => "dim_sweep",
            Command::SweepGrid => "grid_sweep",
            Command::SweepAlpha => "alpha_sweep",
            Command::Transfer => "transfer",
            Command::Report { .. } => "report",
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::standard(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the command; `Ok(true)` means the classification was withheld.
fn run(cli: &Cli) -> Result<bool> {
    if let Command::Report { dir } = &cli.command {
        print!("{}", report::render(dir)?);
        return Ok(false);
    }
    let cfg = load_config(cli)?;
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| Path::new("runs").join(cli.command.dir_name()));
    let csv = cli.format == Format::Csv;
    let mut sink = OutputSink::create(&out, &cfg)?;
    let mut withheld = false;
    match &cli.command {
        Command::Generate => {
            let dataset = ex::phase1_dataset(&cfg)?;
            ex::write_dataset(&mut sink, &dataset)?;
            println!("{} trajectories", dataset.len());
        }
        Command::Train => {
            let model = ex::run_train(&cfg)?;
            ex::write_model(&mut sink, &model)?;
            println!(
                "final loss {:.6} after {} epochs (converged: {})",
                model.training.final_loss, model.training.epochs, model.training.converged
            );
        }
        Command::Phase1 => {
            let (_, summary) = ex::run_phase1(&cfg, &mut sink, csv)?;
            println!(
                "delta {:.4}  auc {:.3}  p {:.4}  classification {}",
                summary.delta,
                summary.auc,
                summary.permutation.p_value,
                if summary.classification_withheld { "withheld" } else { "released" }
            );
            withheld = summary.classification_withheld;
        }
        Command::Temporal => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let r = ex::run_temporal(&ctx)?;
            ex::write_temporal(&mut sink, &r, csv)?;
            println!("best window {} (EPS gap {:.4})", r.best_window, r.best_eps_gap);
        }
        Command::Counterfactual => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let r = ex::run_counterfactual(&ctx)?;
            ex::write_counterfactual(&mut sink, &r)?;
            for (class, c) in &r.per_class {
                println!("{class}: cd_pre {:.4} cd_post {:.4}", c.cd_pre_mean, c.cd_post_mean);
            }
        }
        Command::CrossAgent => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let (r, matrix) = ex::run_cross_agent(&ctx)?;
            ex::write_cross_agent(&mut sink, &r, &matrix)?;
            match r.eci {
                Some(eci) => println!("ECI {eci:.4} over {} pairs", r.n_pairs),
                None => println!("ECI undefined over {} pairs", r.n_pairs),
            }
        }
        Command::Adversarial => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let r = ex::run_adversarial(&ctx)?;
            ex::write_adversarial(&mut sink, &r, csv)?;
            for row in &r.rows {
                println!("{} {:?}: FPR {:.3}", row.agent, row.ratio, row.fpr);
            }
        }
        Command::Baselines => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let r = ex::run_baselines(&ctx)?;
            ex::write_baselines(&mut sink, &r)?;
            for row in &r.core {
                println!("{}: delta {:.4} auc {:.3}", row.model, row.delta, row.auc);
            }
        }
        Command::SweepDim => {
            let r = ex::run_dim_sweep(&cfg)?;
            ex::write_dim_sweep(&mut sink, &r, csv)?;
            for row in &r.rows {
                println!("n_h {}: delta {:.4}", row.n_hidden, row.delta);
            }
        }
        Command::SweepGrid => {
            let r = ex::run_scaling(&cfg)?;
            ex::write_scaling(&mut sink, &r, csv)?;
            for row in &r.grid {
                println!("grid {}: delta {:.4}", row.grid_size, row.delta);
            }
            for row in &r.memory {
                println!("memory {}: delta {:.4}", row.memory_length, row.delta);
            }
        }
        Command::SweepAlpha => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let r = ex::run_alpha_sweep(&ctx)?;
            ex::write_alpha_sweep(&mut sink, &r, csv)?;
            match r.pearson_r {
                Some(p) => println!("pearson r {p:.4}"),
                None => println!("pearson r undefined"),
            }
        }
        Command::Transfer => {
            let ctx = ex::prepare_phase1(&cfg)?;
            let r = ex::run_transfer(&ctx)?;
            ex::write_transfer(&mut sink, &r)?;
            println!("corridor delta {:.4}", r.delta);
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    let manifest = sink.finish()?;
    println!("wrote {} files to {}", manifest.files.len() + 1, out.display());
    Ok(withheld)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_WITHHELD),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
