//! `xaiconsensus` command line. Precedence for every setting is
//! flag > config file > profile default.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use xaiconsensus::consensus::{ConsensusFunction, DEFAULT_N_TOP};
use xaiconsensus::dataset::builtin_spec;
use xaiconsensus::eval::{render_svg, write_hits_csv, DEFAULT_TOP_N};
use xaiconsensus::models::ModelKind;
use xaiconsensus::pipeline::{self, DatasetEntry, ModelEntry, Profile, RunConfig};
use xaiconsensus::{Error, Result};

#[derive(Parser)]
#[command(name = "xaiconsensus", version, about = "Consensus of feature attributions over synthetic benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured datasets as CSV files.
    Generate(RunArgs),
    /// Run the full experiment and write the artifact tree.
    Run(RunArgs),
    /// Fuse attribution record files with one consensus function.
    Consensus(ConsensusArgs),
    /// Score a consensus result against the expected features.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON run config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (defaults to 0 without a config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated consensus functions.
    #[arg(long, value_delimiter = ',')]
    functions: Option<Vec<String>>,
    /// Comma-separated model ids or kinds (knn, forest, oracle).
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    /// Comma-separated builtin dataset names.
    #[arg(long, value_delimiter = ',')]
    datasets: Option<Vec<String>>,
    /// Full dataset sizes and 50 training repeats.
    #[arg(long)]
    paper_scale: bool,
    /// Also fuse all models of each dataset together.
    #[arg(long)]
    pooled: bool,
}

#[derive(Args)]
struct ConsensusArgs {
    /// Attribution record files.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    #[arg(long, default_value = "proposed")]
    function: String,
    /// Votes per record for the voting function.
    #[arg(long, default_value_t = DEFAULT_N_TOP)]
    n_top: usize,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Consensus result file.
    consensus: PathBuf,
    /// Take the expected features from this builtin dataset.
    #[arg(long, conflicts_with = "expected")]
    dataset: Option<String>,
    /// Comma-separated 1-based expected features.
    #[arg(long, value_delimiter = ',')]
    expected: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_TOP_N)]
    top_n: usize,
    /// Directory for the report JSON plus chart CSV/SVG; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_functions(names: &[String]) -> Result<Vec<ConsensusFunction>> {
    names.iter().map(|n| n.trim().parse()).collect()
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::new(0),
    };
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if args.paper_scale {
        config.profile = Profile::Paper;
    }
    if args.pooled {
        config.pooled = true;
    }
    if let Some(f) = &args.functions {
        config.functions = parse_functions(f)?;
    }
    if let Some(names) = &args.datasets {
        config.datasets = names
            .iter()
            .map(|n| {
                let n = n.trim();
                config
                    .datasets
                    .iter()
                    .find(|d| d.name() == n)
                    .cloned()
                    .map_or_else(|| builtin_spec(n).map(|_| DatasetEntry::Name(n.to_string())), Ok)
            })
            .collect::<Result<_>>()?;
    }
    if let Some(names) = &args.models {
        config.models = names
            .iter()
            .map(|n| {
                let n = n.trim();
                if let Some(entry) = config.models.iter().find(|m| m.model_id() == n) {
                    return Ok(entry.clone());
                }
                let kind = match n {
                    "knn" => ModelKind::Knn,
                    "forest" => ModelKind::Forest,
                    "oracle" => ModelKind::Oracle,
                    other => return Err(Error::Config(format!("unknown model `{other}` (expected knn, forest, oracle or a configured id)"))),
                };
                Ok(ModelEntry::of(kind))
            })
            .collect::<Result<_>>()?;
    }
    config.validate()?;
    Ok(config)
}

fn write_out(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Ok(true) on full success, Ok(false) when the command ran but some part failed.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Generate(args) => {
            let config = build_config(&args)?;
            for g in pipeline::cmd_generate(&config)? {
                println!("{} -> {}", g.summary, g.path.display());
            }
            Ok(true)
        }
        Command::Run(args) => {
            let config = build_config(&args)?;
            let outcome = pipeline::cmd_run(&config)?;
            for r in &outcome.report.recall {
                println!("{:<11} {:<6} mean recall {:.3} over {} cells", r.function, r.dataset, r.mean_recall, r.cells);
            }
            for c in outcome.report.cells.iter().filter(|c| c.error.is_some()) {
                eprintln!("cell {} failed: {}", c.stem(), c.error.as_deref().unwrap_or_default());
            }
            println!(
                "{} cells, {} failed, artifacts in {}",
                outcome.manifest.cells_total,
                outcome.manifest.cells_failed,
                outcome.run_dir.display()
            );
            Ok(outcome.manifest.success)
        }
        Command::Consensus(args) => {
            let function: ConsensusFunction = args.function.parse()?;
            let result = pipeline::cmd_consensus(&args.records, function, args.n_top)?;
            for w in &result.warnings {
                eprintln!("warning: {w}");
            }
            write_out(&pipeline::to_json(&result)?, args.out.as_ref())?;
            Ok(true)
        }
        Command::Evaluate(args) => {
            let expected: BTreeSet<usize> = match (&args.dataset, &args.expected) {
                (Some(name), _) => builtin_spec(name)?.expected_features,
                (None, Some(list)) => list.iter().copied().collect(),
                (None, None) => return Err(Error::Config("one of --dataset or --expected is required".into())),
            };
            let report = pipeline::cmd_evaluate(&args.consensus, &expected, args.top_n)?;
            match &args.out {
                Some(dir) => {
                    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
                        path: dir.clone(),
                        source: e,
                    })?;
                    let stem = args
                        .consensus
                        .file_stem()
                        .map_or_else(|| report.function.to_string(), |s| s.to_string_lossy().into_owned());
                    write_out(&pipeline::to_json(&report)?, Some(&dir.join(format!("{stem}_hits.json"))))?;
                    write_hits_csv(&report, &dir.join(format!("{stem}.csv")))?;
                    let title = format!("{stem} (recall {:.2})", report.expected_recall);
                    write_out(&render_svg(&title, &report), Some(&dir.join(format!("{stem}.svg"))))?;
                }
                None => write_out(&pipeline::to_json(&report)?, None)?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
