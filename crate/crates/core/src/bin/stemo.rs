use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stemo::harness::{self, ExperimentConfig, Report};
use stemo::morl::{discover_preference, DiscoveryConfig, HiddenPreferenceEnv, Preference};
use stemo::{Result, StemoError};

#[derive(Parser)]
#[command(name = "stemo", version, about = "Early spatio-temporal forecasting with preference-conditioned halting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "stemo-out")]
    out: PathBuf,
    /// `key=value` overrides applied after the config file.
    #[arg(value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset as series and graph CSVs.
    Synth {
        /// changepoint, periodic or diffusion.
        #[arg(long, default_value = "changepoint")]
        spec: String,
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Train and write the checkpoint, training log, report and summary.
    Train(Common),
    /// Sweep preferences with a saved checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Hypervolume and spacing per method of a report CSV.
    Pareto {
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Recover a hidden preference from scalar rewards.
    DiscoverPreference {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Hidden accuracy weight.
        #[arg(long)]
        hidden: f64,
        #[arg(long, default_value_t = 100)]
        budget: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Train the ablation variants and compare them at 50% used time.
    Ablate {
        #[arg(long, default_value_t = 4)]
        refinements: usize,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { spec, n, common } => {
            let mut cfg = common.config()?;
            cfg.set("source", &spec)?;
            if let Some(n) = n {
                cfg.n = n;
            }
            cfg.validate()?;
            let ds = harness::load_dataset(&cfg)?;
            std::fs::create_dir_all(&common.out).map_err(|e| StemoError::Io {
                path: common.out.clone(),
                source: e,
            })?;
            let series = common.out.join("series.csv");
            let graph = common.out.join("graph.csv");
            ds.write_series_csv(&series)?;
            ds.write_graph_csv(&graph)?;
            println!("wrote {} ({} rows x {} nodes) and {}", series.display(), ds.len(), ds.n(), graph.display());
        }
        Command::Train(common) => {
            let cfg = common.config()?;
            let out = harness::run_experiment(&cfg, &common.out)?;
            print!("{}", std::fs::read_to_string(&out.summary_path).unwrap_or_default());
            println!("checkpoint {}", out.checkpoint_path.display());
        }
        Command::Evaluate { checkpoint, common } => {
            let cfg = common.config()?;
            let ck = checkpoint.unwrap_or_else(|| common.out.join("model.ckpt"));
            let model = harness::load_model(&cfg, &ck)?;
            let prep = harness::load_and_prepare(&cfg)?;
            let rows = harness::sweep(&model, &prep.windows, &Preference::sweep(), cfg.seed, &cfg.ablation().label())?;
            let report = Report::new(rows);
            print!("{}", report.to_csv());
        }
        Command::Pareto { report, common } => {
            let path = report.unwrap_or_else(|| common.out.join("report.csv"));
            print!("{}", Report::read(&path)?.summary_text()?);
        }
        Command::DiscoverPreference {
            checkpoint,
            hidden,
            budget,
            common,
        } => {
            let cfg = common.config()?;
            let ck = checkpoint.unwrap_or_else(|| common.out.join("model.ckpt"));
            let model = harness::load_model(&cfg, &ck)?;
            let prep = harness::load_and_prepare(&cfg)?;
            let hidden = Preference::new(hidden, 1.0 - hidden).map_err(|e| StemoError::Config(e.root().to_string()))?;
            let mut env = HiddenPreferenceEnv::new(prep.windows.test.clone(), hidden, cfg.seed)?;
            let found = discover_preference(
                &model,
                &mut env,
                &DiscoveryConfig {
                    budget,
                    seed: cfg.seed,
                    ..DiscoveryConfig::default()
                },
            )?;
            println!(
                "recovered ({:.3}, {:.3}) hidden ({:.3}, {:.3}) l1 {:.3} episodes {}",
                found.preference.accuracy(),
                found.preference.time(),
                hidden.accuracy(),
                hidden.time(),
                found.preference.l1_distance(&hidden),
                found.episodes
            );
        }
        Command::Ablate { refinements, common } => {
            let cfg = common.config()?;
            let out = harness::run_ablations(&cfg, &common.out, refinements)?;
            print!("{}", out.report.summary_text()?);
            for p in &out.operating_points {
                println!("{} mae@{}% {:.4}", p.method, p.target_pct, p.mae);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
