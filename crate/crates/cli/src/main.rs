use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmo_core::config::{EvalSource, Paths, RunConfig};
use fmo_core::pipeline::{self, PipelineError};
use fmo_core::segment::{BaselineParams, ExternalParams, SegmenterSpec};

/// Synthesize, segment, track and score fast-moving objects.
#[derive(Parser)]
#[command(name = "fmo", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// `baseline` or `external:<command>`.
    #[arg(long, global = true, value_parser = parse_segmenter)]
    segmenter: Option<SegmenterSpec>,
    /// Put dataset/, masks/, tracks/ and report/ under this directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic dataset and its manifest.
    Generate,
    /// Write one mask per window.
    Segment,
    /// Track each sequence's masks into JSONL.
    Track,
    /// Score tracks or masks against ground truth.
    Eval {
        #[arg(long, value_enum)]
        source: Option<Source>,
    },
    /// Throughput of segmentation plus tracking per resolution.
    Bench,
    /// Print the effective configuration.
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Track,
    Masks,
}

fn parse_segmenter(s: &str) -> Result<SegmenterSpec, String> {
    match s.split_once(':') {
        None if s == "baseline" => Ok(SegmenterSpec::Baseline(BaselineParams::default())),
        Some(("external", cmd)) if !cmd.trim().is_empty() => Ok(SegmenterSpec::External(ExternalParams::new(cmd))),
        _ => Err(format!("expected `baseline` or `external:<command>`, got `{s}`")),
    }
}

fn effective_config(common: &Common) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path).map_err(|e| PipelineError::Config(e.0))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    if let Some(spec) = &common.segmenter {
        // keep configured timeouts when only the command changes
        cfg.segmenter = match (spec, &cfg.segmenter) {
            (SegmenterSpec::External(new), SegmenterSpec::External(old)) => {
                SegmenterSpec::External(ExternalParams { command: new.command.clone(), ..old.clone() })
            }
            (SegmenterSpec::Baseline(_), SegmenterSpec::Baseline(_)) => cfg.segmenter.clone(),
            _ => spec.clone(),
        };
    }
    if let Some(root) = &common.out {
        cfg.paths = Paths::under(root);
    }
    cfg.validate().map_err(|e| PipelineError::Config(e.0))?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = effective_config(&cli.common)?;
    match cli.command {
        Command::Generate => {
            let s = pipeline::run_generate(&cfg)?;
            println!("sequences: {}", s.n_sequences);
            println!("samples: {}", s.n_samples);
            println!("fmo fraction: {:.4}", s.fmo_fraction);
            println!("config hash: {}", s.config_hash);
            println!("dataset: {}", cfg.paths.dataset.display());
        }
        Command::Segment => {
            let n = pipeline::run_segment(&cfg)?;
            println!("segmented {n} windows into {}", cfg.paths.masks.display());
        }
        Command::Track => {
            let n = pipeline::run_track(&cfg)?;
            println!("tracked {n} sequences into {}", cfg.paths.tracks.display());
        }
        Command::Eval { source } => {
            if let Some(s) = source {
                cfg.metrics.source = match s {
                    Source::Track => EvalSource::Track,
                    Source::Masks => EvalSource::Masks,
                };
            }
            let report = pipeline::run_eval(&cfg)?;
            print!("{}", report.to_text());
        }
        Command::Bench => {
            let report = pipeline::run_bench(&cfg)?;
            print!("{}", report.to_text());
            if !report.is_monotone() {
                eprintln!("warning: fps is not monotone in frame area");
            }
        }
        Command::Config => println!("{}", cfg.to_json()),
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
