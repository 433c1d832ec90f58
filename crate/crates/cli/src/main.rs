use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use depositum::harness::{self, ExperimentConfig};
use depositum::topology::{GraphKind, TopologySpec, Weighting};

#[derive(Parser)]
#[command(name = "depositum", version, about = "Decentralized composite federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write one CSV trace per seed.
    Run(Common),
    /// Run a config's sweep section: one trace per (value, seed) plus summary.csv.
    Sweep(Common),
    /// Corollary 1 step sizes for each client count, averaged over seeds.
    Speedup {
        #[command(flatten)]
        common: Common,
        /// Client counts, e.g. 4,9,16,25 (overrides the config).
        #[arg(long, value_delimiter = ',')]
        clients: Option<Vec<usize>>,
    },
    /// Print lambda, delta1 and delta2 for a topology.
    Spectral(SpectralArgs),
    /// Print per-class client proportions of the configured partition.
    PartitionReport(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: the config's `output`, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds overriding the config.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    eval_every: Option<u64>,
}

#[derive(Args)]
struct SpectralArgs {
    /// Take topology, period and alpha * rho from a config.
    #[arg(long, conflicts_with_all = ["topology", "clients"])]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["complete", "ring", "star"])]
    topology: Option<String>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long, default_value = "metropolis", value_parser = ["uniform", "metropolis"])]
    weighting: String,
    #[arg(long, default_value_t = 1)]
    period: u64,
    #[arg(long, default_value_t = 0.0)]
    alpha_rho: f64,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seeds) = &self.seeds {
            cfg.seeds = seeds.clone();
        }
        if let Some(e) = self.eval_every {
            cfg.eval_every = e;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
    }
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run_spectral(args: &SpectralArgs) -> Result<()> {
    let (topology, period, alpha_rho) = match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            let alpha_rho = cfg
                .hyperparams
                .explicit(cfg.iterations)
                .map_or(0.0, |hp| hp.alpha * cfg.regularizer.weak_modulus());
            (cfg.topology.clone(), cfg.hyperparams.period(), alpha_rho)
        }
        None => {
            let (Some(kind), Some(n)) = (&args.topology, args.clients) else {
                bail!("spectral needs --config or both --topology and --clients");
            };
            let kind = match kind.as_str() {
                "complete" => GraphKind::Complete,
                "ring" => GraphKind::Ring,
                _ => GraphKind::Star,
            };
            let weighting = if args.weighting == "uniform" { Weighting::Uniform } else { Weighting::Metropolis };
            (TopologySpec { kind, n, weighting, edges: Vec::new() }, args.period, args.alpha_rho)
        }
    };
    let r = harness::spectral(&topology, period, alpha_rho)?;
    println!("n        {}", r.n);
    println!("lambda   {}", r.lambda);
    println!("T0       {}", r.period);
    println!("alpha*rho {}", r.alpha_rho);
    println!("alpha*rho bound {}", r.alpha_rho_bound);
    match r.deltas {
        Some((d1, d2)) => {
            println!("delta1   {d1}");
            println!("delta2   {d2}");
        }
        None => println!("delta1   n/a (alpha*rho is not below the bound)"),
    }
    Ok(())
}

fn run_partition_report(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let table = harness::partition_report(&cfg)?;
    let header: Vec<String> = (0..cfg.clients()).map(|i| format!("client{i}")).collect();
    println!("class,{}", header.join(","));
    for (k, row) in table.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.4}")).collect();
        println!("{k},{}", cells.join(","));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    harness::configure_threads()?;
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            print_written(&harness::cli_run(&cfg, &common.out_dir(&cfg))?);
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            if cfg.sweep.is_none() {
                bail!("{} has no sweep section", common.config.display());
            }
            let summary = harness::cli_sweep(&cfg, &common.out_dir(&cfg))?;
            println!("wrote {}", summary.display());
        }
        Command::Speedup { common, clients } => {
            let mut cfg = common.load()?;
            if let Some(clients) = clients {
                cfg.speedup = Some(harness::SpeedupConfig { clients });
            }
            if cfg.speedup.is_none() {
                bail!("speedup needs a `speedup.clients` list or --clients");
            }
            let out = common.out_dir(&cfg);
            let summary = harness::cli_speedup(&cfg, &out)?;
            for row in &summary.rows {
                println!("n={:<4} final mean loss {:.6}", row.n, row.final_loss());
            }
            println!("final loss non-increasing in n: {}", summary.non_increasing);
            println!("wrote {}", out.join("summary.csv").display());
        }
        Command::Spectral(args) => run_spectral(&args)?,
        Command::PartitionReport(common) => run_partition_report(&common)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(2)
        }
    }
}
