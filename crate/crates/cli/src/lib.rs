//! Command-line driver for the plane-matching flow pipeline: configuration
//! files, NNF caching, artifact output and metric reports.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::FlowOptions;
use crate::config::RunConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "msgpm", version, about = "Multi-scale plane matching optical flow")]
pub struct Cli {
    /// Worker threads for the parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
    #[arg(long)]
    pub img1: Option<PathBuf>,
    #[arg(long)]
    pub img2: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Preprocessor name: `none` or `hsv-equalize`.
    #[arg(long)]
    pub preprocess: Option<String>,
    /// Directory caching initial NNFs across runs.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

impl ConfigArgs {
    /// Defaults, then the config file, then dedicated flags, then `--set`.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        if let Some(p) = &self.img1 {
            cfg.img1 = Some(p.clone());
        }
        if let Some(p) = &self.img2 {
            cfg.img2 = Some(p.clone());
        }
        if let Some(s) = self.seed {
            cfg.set("seed", &s.to_string())?;
        }
        if let Some(p) = &self.preprocess {
            cfg.set("preprocess", p)?;
        }
        cfg.apply_overrides(&self.sets)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: dense flow, occlusion mask and reports.
    Flow {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        gt_flow: Option<PathBuf>,
        #[arg(long)]
        gt_occ: Option<PathBuf>,
        /// Write per-level assignments, models and NNFs here.
        #[arg(long)]
        dump_levels: Option<PathBuf>,
        /// Dense `.flo` replacing the built-in interpolation.
        #[arg(long)]
        external_interp: Option<PathBuf>,
    },
    /// PatchMatch nearest-neighbor fields only.
    Nnf {
        #[command(flatten)]
        config: ConfigArgs,
        /// Forward NNF output (`.flo`); costs go next to it as `.pf32`.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        backward: Option<PathBuf>,
    },
    /// Endpoint-error and occlusion metrics of an existing flow.
    Eval {
        #[arg(long)]
        flow: PathBuf,
        #[arg(long)]
        gt_flow: PathBuf,
        #[arg(long)]
        gt_occ: Option<PathBuf>,
        /// Predicted occlusion mask to score against `--gt-occ`.
        #[arg(long)]
        occ: Option<PathBuf>,
        #[arg(long, default_value = "msgpm")]
        method: String,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// EPE table of two flows and their difference map.
    Compare {
        #[arg(long)]
        flow_a: PathBuf,
        #[arg(long)]
        flow_b: PathBuf,
        #[arg(long)]
        gt_flow: PathBuf,
        #[arg(long)]
        gt_occ: Option<PathBuf>,
        #[arg(long, default_value = "a")]
        name_a: String,
        #[arg(long, default_value = "b")]
        name_b: String,
        /// Difference-map PNG.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic fixture with ground truth.
    Synth {
        /// Fixture name, or `all` for one subdirectory per fixture.
        #[arg(long)]
        fixture: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Executes one parsed command, printing results to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Flow {
            config,
            out_dir,
            gt_flow,
            gt_occ,
            dump_levels,
            external_interp,
        } => {
            let mut cfg = config.resolve()?;
            if out_dir.is_some() {
                cfg.out_dir = out_dir;
            }
            if gt_flow.is_some() {
                cfg.gt_flow = gt_flow;
            }
            if gt_occ.is_some() {
                cfg.gt_occ = gt_occ;
            }
            if let Some(p) = external_interp {
                cfg.pipeline.interp.external = Some(p);
                cfg.pipeline.interpolator = "external".to_string();
            }
            let opts = FlowOptions {
                dump_levels,
                cache: config.cache.clone(),
            };
            let s = commands::run_flow(&cfg, &opts)?;
            let n = s.output.flow.len();
            println!(
                "flow: wrote {} ({} of {} pixels plane-assigned, {} occluded)",
                s.out_dir.display(),
                s.output.propagated.assigned_count(),
                n,
                s.output.occlusion.count()
            );
            if let Some(e) = &s.epe {
                print!("{}", report::epe_table(&[("msgpm", e)]));
            }
            if let Some(o) = s.report.as_ref().and_then(|r| r.occlusion.as_ref()) {
                println!("occlusion precision {:.3} recall {:.3} f1 {:.3}", o.precision, o.recall, o.f1);
            }
            Ok(())
        }
        Command::Nnf { config, out, backward } => {
            let cfg = config.resolve()?;
            commands::run_nnf(&cfg, &out, backward.as_deref(), config.cache.as_deref())?;
            println!("nnf: wrote {}", out.display());
            Ok(())
        }
        Command::Eval {
            flow,
            gt_flow,
            gt_occ,
            occ,
            method,
            json,
        } => {
            let t = commands::run_eval(&flow, &gt_flow, gt_occ.as_deref(), occ.as_deref(), &method, json.as_deref())?;
            print!("{t}");
            Ok(())
        }
        Command::Compare {
            flow_a,
            flow_b,
            gt_flow,
            gt_occ,
            name_a,
            name_b,
            out,
        } => {
            let t = commands::run_compare(&flow_a, &flow_b, &gt_flow, gt_occ.as_deref(), (&name_a, &name_b), &out)?;
            print!("{t}");
            Ok(())
        }
        Command::Synth { fixture, seed, out_dir } => {
            if fixture == "all" {
                for f in msgpm::synth::FIXTURES {
                    commands::run_synth(f, seed, &out_dir.join(f))?;
                }
            } else {
                commands::run_synth(&fixture, seed, &out_dir)?;
            }
            println!("synth: wrote {}", out_dir.display());
            Ok(())
        }
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("usage: --jobs must be at least 1");
            return 1;
        }
        // A pool built earlier in the process keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("msgpm: {e}");
            e.exit_code()
        }
    }
}
