use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use ris_fbl_cli::{cmd_run, cmd_sweep, cmd_validate, load_spec, ExperimentSpec};
use ris_fbl_core::metrics::RatioMode;

#[derive(Parser)]
#[command(name = "ris-fbl", version, about = "Resilience of RIS-assisted cell-free downlinks under finite-blocklength recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one disruption episode.
    Run {
        #[command(flatten)]
        common: Common,
        /// Seed for topology, channels and initial phases.
        #[arg(long)]
        seed: Option<u64>,
        /// Control run without any blockage.
        #[arg(long)]
        no_blockage: bool,
    },
    /// Sweep blocklength, RIS size and rate target over seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        no_plots: bool,
    },
    /// Load and check a configuration, then print it fully resolved.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// `stale` keeps the pre-blockage configuration, `reoptimize` re-runs IBL.
    #[arg(long)]
    ignore_branch: Option<String>,
    /// Let per-user rate ratios exceed one in absorption and adaptation.
    #[arg(long)]
    uncapped_metrics: bool,
}

impl Common {
    fn load(&self) -> Result<ExperimentSpec> {
        let mut spec = load_spec(&self.config)?;
        if let Some(out) = &self.out {
            spec.set_output_dir(out.clone());
        }
        if let Some(branch) = &self.ignore_branch {
            spec.set_ignore_branch(branch)?;
        }
        if self.uncapped_metrics {
            spec.set_ratio_mode(RatioMode::Uncapped);
        }
        Ok(spec)
    }
}

fn report_defaults(spec: &ExperimentSpec) {
    if !spec.defaults_applied.is_empty() {
        eprintln!("defaults applied: {}", spec.defaults_applied.join(", "));
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            common,
            seed,
            no_blockage,
        } => {
            let mut spec = common.load()?;
            if let Some(seed) = seed {
                spec.set_seed(seed);
            }
            if no_blockage {
                spec.set_blockage(false);
            }
            report_defaults(&spec);
            let out = cmd_run(&spec)?;
            let r = &out.result;
            println!(
                "seed {} eta {} M {}: decision {} r_abs {:.4} r_ada {:.4} r_rec {:.4} r {:.4} ({})",
                r.seed,
                r.blocklength,
                r.n_ris_elements,
                r.decision.map(|d| d.as_str()).unwrap_or("-"),
                r.r_abs,
                r.r_ada,
                r.r_rec,
                r.r,
                r.status.label()
            );
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep {
            common,
            jobs,
            no_plots,
        } => {
            let mut spec = common.load()?;
            if no_plots {
                spec.set_emit_plots(false);
            }
            report_defaults(&spec);
            let out = cmd_sweep(&spec, jobs)?;
            for (rate, table) in &out.tables {
                println!("r_des = {} Mbit/s", rate / 1e6);
                for s in table.summarize() {
                    match s.r {
                        Some(q) => println!(
                            "  eta {:>6} M {:>5}  median r {:.4}  [{:.4}, {:.4}]  ok {} failed {}",
                            s.eta, s.m, q.median, q.q1, q.q3, s.ok, s.failed
                        ),
                        None => println!("  eta {:>6} M {:>5}  all {} cells failed", s.eta, s.m, s.failed),
                    }
                }
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Validate { common } => {
            let spec = common.load()?;
            let (text, defaults) = cmd_validate(&spec);
            print!("{text}");
            if !defaults.is_empty() {
                eprintln!("defaults applied: {}", defaults.join(", "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
