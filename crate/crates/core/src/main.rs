use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clusterlqr::harness::{
    run_sweep, run_weight_comparison, validate_instance, write_generated, write_report, Design, ExperimentConfig,
    SweepReport,
};
use clusterlqr::netgen::ConsensusParams;
use clusterlqr::projection::count_links;
use clusterlqr::{Error, ErrorKind, Result};

#[derive(Parser)]
#[command(name = "clusterlqr", version, about = "Clustering-based reduced-order LQR experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clustered consensus network as Matrix Market files.
    Generate {
        /// JSON generator parameters (defaults: n=100, 4 groups, p=0.5, ratio=10).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "network")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every (design, r, seed) cell of an experiment config.
    Sweep(RunArgs),
    /// Compare nominal and designed weights on fixed clusters.
    Weights(RunArgs),
    /// Check PBH conditions, Assumption 3, the eigen-gap and stability certificates.
    Validate(RunArgs),
    /// Link counts of the two-layer controller against full LQR.
    Links {
        #[arg(long)]
        n: u64,
        #[arg(long = "r-list", value_delimiter = ',', required = true)]
        r_list: Vec<u64>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long = "r-list", value_delimiter = ',')]
    r_list: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    design: Option<Vec<String>>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(k) = self.kappa {
            cfg.kappa = k;
        }
        if let Some(r) = &self.r_list {
            cfg.r_values = r.clone();
        }
        if let Some(d) = &self.design {
            cfg.designs = d.iter().map(|s| Design::parse(s)).collect::<Result<_>>()?;
        }
        if let Some(o) = &self.out {
            cfg.out_dir = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn print_rows(rep: &SweepReport) {
    println!("{:<22} {:>4} {:>6} {:>12} {:>12} {:>8} {:>6}", "design", "r", "seed", "rel_error", "xi_kappa", "links", "stable");
    for d in &rep.rows {
        let r = &d.row;
        let err = r.rel_error.map_or("-".to_string(), |e| format!("{e:.4e}"));
        println!(
            "{:<22} {:>4} {:>6} {:>12} {:>12.4e} {:>8} {:>6}",
            r.design, r.r, r.seed, err, r.xi_kappa, r.links, r.stable
        );
    }
}

fn finish(rep: &SweepReport, dir: &Path, stem: &str) -> Result<ExitCode> {
    write_report(rep, dir, stem)?;
    print_rows(rep);
    eprintln!("wrote {}", dir.join(format!("{stem}.csv")).display());
    if rep.any_unstable() {
        eprintln!("some designs produced an unstable closed loop");
        return Ok(ExitCode::from(4));
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Command::Generate { config, out, seed } => {
            let mut params = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => ConsensusParams::new(100, 4, 0.5, 10.0, 0),
            };
            if let Some(s) = seed {
                params.seed = s;
            }
            write_generated(&params, &out)?;
            eprintln!("wrote network to {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep(args) => {
            let cfg = args.load()?;
            finish(&run_sweep(&cfg)?, &out_dir(&cfg), "sweep")
        }
        Command::Weights(args) => {
            let cfg = args.load()?;
            finish(&run_weight_comparison(&cfg)?, &out_dir(&cfg), "weights")
        }
        Command::Validate(args) => {
            let cfg = args.load()?;
            let rep = validate_instance(&cfg)?;
            let json = serde_json::to_string_pretty(&rep)?;
            println!("{json}");
            if let Some(dir) = &cfg.out_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("validate.json"), &json)?;
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Links { n, r_list } => {
            println!("{:>8} {:>8} {:>12} {:>12}", "n", "r", "two_layer", "full_lqr");
            for r in r_list {
                let c = count_links(n, r)?;
                println!("{:>8} {:>8} {:>12} {:>12}", n, r, c.two_layer, c.full_lqr);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Argument => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Instability => 4,
            })
        }
    }
}
