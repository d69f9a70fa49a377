use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use manifold_recon_cli::config::RunConfig;
use manifold_recon_cli::error::Result;
use manifold_recon_cli::{experiments, pipeline};

#[derive(Parser)]
#[command(name = "mrecon", version, about = "Navigator-driven dynamic MRI reconstruction")]
struct Cli {
    /// INI configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Simulate,
    Estimate,
    Reconstruct,
    Bin,
    All,
    Experiment {
        #[arg(long, value_enum)]
        experiment: Which,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Navcount,
    Duration,
    Methods,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load(cli)?;
    match cli.command {
        Command::Simulate => pipeline::cmd_simulate(&cfg).map(drop),
        Command::Estimate => pipeline::cmd_estimate(&cfg).map(drop),
        Command::Reconstruct => {
            let r = pipeline::cmd_reconstruct(&cfg)?;
            if let Some((x, g)) = r.nrmse {
                println!("nrmse {x:.4} (gridding {g:.4})");
            }
            Ok(())
        }
        Command::Bin => pipeline::cmd_bin(&cfg).map(drop),
        Command::All => pipeline::cmd_all(&cfg),
        Command::Experiment { experiment } => match experiment {
            Which::Navcount => {
                for r in experiments::navcount(&cfg)?.rows {
                    println!("{} navigators: nrmse {:.4} high {:.4} low {:.4}", r.navigators, r.nrmse, r.nrmse_high_motion, r.nrmse_low_motion);
                }
                Ok(())
            }
            Which::Duration => {
                let d = experiments::duration(&cfg)?;
                for m in ["low", "high"] {
                    println!("{m} motion inflation {:.4}", d.inflation(m).unwrap_or(f64::NAN));
                }
                Ok(())
            }
            Which::Methods => {
                for r in experiments::methods(&cfg)?.rows {
                    println!(
                        "{}: resp {:.3} card {:.3} nrmse {:.4} degradation {:.3}",
                        r.method,
                        r.resp_agreement,
                        r.card_agreement,
                        r.nrmse,
                        r.degradation()
                    );
                }
                Ok(())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
