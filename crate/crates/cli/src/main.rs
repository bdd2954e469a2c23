use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand};

use aegeo::dataio::DatasetKind;
use aegeo::experiment::{
    self, checkpoint_path, eval_points, load_mnist_data, read_results, read_theorem1, render_figures,
    render_recon_grid, run_experiment, train_or_load, verify, ExperimentConfig, Profile, RunOptions, RESULTS_FILE,
    THEOREM1_FILE,
};
use aegeo::network::load_checkpoint_for_dim;
use aegeo::spectra::{spearman, Source};

#[derive(Parser)]
#[command(
    name = "aegeo",
    version,
    about = "Jacobian eigenvalue geometry of MNIST autoencoders"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON config; fields override the profile preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset grid: `full` (d = 2..=20, two seeds, 300 epochs) or `desk`.
    #[arg(long, global = true)]
    profile: Option<Profile>,
    /// Shorthand for `--profile desk`.
    #[arg(long, global = true, conflicts_with = "profile")]
    desk: bool,
    /// Use this single seed for models and data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory with the four MNIST idx files.
    #[arg(long, global = true)]
    mnist_dir: Option<PathBuf>,
    /// Log progress to stderr (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or load cached) models for every latent dim and seed.
    Train {
        /// Retrain when a cached checkpoint has different settings.
        #[arg(long)]
        force: bool,
    },
    /// Write the synthetic datasets of the config to binary cache files.
    GenData,
    /// Train as needed and compute the result tables.
    Analyze {
        #[arg(long)]
        force: bool,
        /// Also write every per-point eigenvalue to spectra.csv.
        #[arg(long)]
        dump_spectra: bool,
    },
    /// Render figures and reconstruction grids from computed results.
    Report {
        /// Sample/reconstruction pairs per grid row.
        #[arg(long, default_value_t = 8)]
        pairs: usize,
    },
    /// Run the numerical property checks and print a pass/fail table.
    Verify,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let profile = if g.desk { Some(Profile::Desk) } else { g.profile };
    let mut cfg = match &g.config {
        Some(path) => ExperimentConfig::load(path, profile.unwrap_or(Profile::Full))?,
        None => ExperimentConfig::preset(profile.unwrap_or(Profile::Full)),
    };
    // With a config file, an explicit --profile must agree with it.
    if let (Some(p), Some(_)) = (profile, &g.config) {
        if p != cfg.profile {
            bail!(
                "--profile {p:?} conflicts with the config file's profile {:?}",
                cfg.profile
            );
        }
    }
    if let Some(seed) = g.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &g.out {
        cfg.output_dir = out.clone();
    }
    if let Some(dir) = &g.mnist_dir {
        cfg.mnist_dir = Some(dir.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn train(cfg: &ExperimentConfig, force: bool) -> Result<()> {
    let mnist = load_mnist_data(cfg)?;
    let opts = RunOptions { force };
    for &d in &cfg.latent_dims {
        for &seed in &cfg.seeds {
            train_or_load(cfg, &mnist, d, seed, &opts)?;
            println!("{}", checkpoint_path(cfg, d, seed).display());
        }
    }
    Ok(())
}

fn analyze(mut cfg: ExperimentConfig, force: bool, dump_spectra: bool) -> Result<()> {
    cfg.dump_spectra |= dump_spectra;
    let results = run_experiment(&cfg, &RunOptions { force })?;
    let state = if results.cached { " (cached)" } else { "" };
    println!(
        "{} rows{state} -> {}",
        results.rows.len(),
        cfg.output_dir.join(RESULTS_FILE).display()
    );
    Ok(())
}

fn report(cfg: &ExperimentConfig, pairs: usize) -> Result<()> {
    let results_path = cfg.output_dir.join(RESULTS_FILE);
    if !results_path.exists() {
        bail!(
            "{} not found; run `aegeo analyze` with the same options first",
            results_path.display()
        );
    }
    let rows = read_results(&results_path)?;
    let figures = render_figures(&rows, &cfg.output_dir.join("figures"))?;
    println!(
        "{} figures in {}",
        figures.len(),
        cfg.output_dir.join("figures").display()
    );

    let mnist = load_mnist_data(cfg)?;
    let mut sets = Vec::new();
    for spec in &cfg.datasets {
        sets.push(eval_points(cfg, spec, &mnist)?);
    }
    let refs: Vec<_> = sets.iter().collect();
    for &d in &cfg.latent_dims {
        for &seed in &cfg.seeds {
            let ckpt = checkpoint_path(cfg, d, seed);
            let model = load_checkpoint_for_dim(&ckpt, d).map_err(|e| anyhow!("{e}; run `aegeo train` first"))?;
            let path = cfg.output_dir.join("grids").join(format!("recon_d{d}_s{seed}.pgm"));
            render_recon_grid(&model, &refs, pairs, &path)?;
        }
    }
    println!(
        "grid rows: {}",
        cfg.datasets.iter().map(|s| s.id()).collect::<Vec<_>>().join(", ")
    );

    println!(
        "\n{:<4} {:<5} {:<18} {:>8} {:>8} {:>8} {:>10} {:>8}",
        "d", "seed", "dataset", "AM|l|", "GM|l|", "flip", "eigdiff", "thm2"
    );
    for r in rows.iter().filter(|r| r.source == Source::InputJacobian) {
        println!(
            "{:<4} {:<5} {:<18} {:>8.4} {:>8.4} {:>8.3} {:>10.3e} {:>8.3}",
            r.d,
            r.seed,
            r.dataset,
            r.arith_mean_modulus,
            r.geo_mean_modulus,
            r.orientation_flip_fraction,
            r.eig_diff_ratio_mean,
            r.theorem2_rate
        );
    }
    let t1 = read_theorem1(&cfg.output_dir.join(THEOREM1_FILE))?;
    let residual: Vec<f64> = t1.iter().map(|p| p.residual).collect();
    let error: Vec<f64> = t1.iter().map(|p| p.recon_error).collect();
    match spearman(&residual, &error) {
        Some(rho) => println!(
            "\nspectral residual vs reconstruction error: Spearman {rho:.3} over {} points",
            t1.len()
        ),
        None => println!("\nspectral residual vs reconstruction error: undefined"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Train { force } => train(&cfg, force)?,
        Command::GenData => {
            if cfg.datasets.iter().all(|s| s.kind == DatasetKind::Mnist) {
                bail!("config has no synthetic datasets");
            }
            for p in experiment::generate_datasets(&cfg)? {
                println!("{}", p.display());
            }
        }
        Command::Analyze { force, dump_spectra } => analyze(cfg, force, dump_spectra)?,
        Command::Report { pairs } => report(&cfg, pairs)?,
        Command::Verify => {
            let checks = verify::run_all(&cfg.mnist_dir());
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed()).count();
            println!("{} checks, {failed} failed", checks.len());
            return Ok(failed == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            // Error messages already include their causes.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
