mod config;
mod manifest;
mod pipeline;
mod serve;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use proofgrade::embeddings::EmbedError;
use proofgrade::evalharness::SweepConfig;
use proofgrade::grader::SelectionSplit;
use proofgrade::studystats::{TTestKind, DEFAULT_MIN_CHARS};

use crate::config::{Config, ConfigError};

#[derive(Parser)]
#[command(name = "proofgrade", version, about = "Rubric autograding for induction proofs")]
struct Cli {
    /// TOML file with [providers], [training], [paths] and [server] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for tables, manifests and splits' siblings.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Selection {
    Validation,
    Test,
}

#[derive(Clone, Copy, ValueEnum)]
enum TTest {
    Welch,
    Paired,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus and write a seeded train/test/validation split per problem.
    Ingest {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Embed the corpus into the provider's cache, or move a cache between machines.
    Embed {
        #[arg(long, default_value = "test")]
        provider: String,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Merge a cache file into the local cache.
        #[arg(long)]
        import: Option<PathBuf>,
        /// Write the provider's cache to this file afterwards.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Train the seven rubric models for one problem.
    Train {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "test")]
        provider: String,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Training seed; overrides [training] seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Candidate epoch counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<usize>>,
        #[arg(long, value_enum)]
        selection: Option<Selection>,
        /// Split seed used when no stored split exists.
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Model output path; defaults to {models}/{problem}.pgmd.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score trained models on the test split and write per-rubric metrics.
    Eval {
        #[arg(long, required = true)]
        problem: Vec<String>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        provider: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
    },
    /// Accuracy against training-set size.
    Sweep {
        #[arg(long)]
        problem: String,
        #[arg(long, default_value = "test")]
        provider: String,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.30)]
        test_frac: f64,
        /// Training sizes, comma separated; defaults to 50, 100, 150, 200, 300, ...
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        epochs: Option<Vec<usize>>,
    },
    /// Grade one proof file with a trained model.
    Grade {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to the provider recorded in the model file.
        #[arg(long)]
        provider: Option<String>,
    },
    /// Run the grading service.
    Serve {
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        provider: Option<String>,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        problems: Option<PathBuf>,
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        static_dir: Option<PathBuf>,
        #[arg(long)]
        feedback: Option<PathBuf>,
        #[arg(long)]
        max_attempts: Option<u32>,
    },
    /// Study tables from an attempt log and an optional survey export.
    Stats {
        #[arg(long)]
        log: Option<PathBuf>,
        /// One student id per line; students with no attempts are screened too.
        #[arg(long)]
        roster: Option<PathBuf>,
        /// CSV with columns student_id, group, question_id, value.
        #[arg(long)]
        survey: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MIN_CHARS)]
        min_chars: usize,
        #[arg(long, value_enum, default_value = "welch")]
        t_test: TTest,
    },
    /// Write a synthetic corpus with a planted, learnable labelling.
    Synth {
        #[arg(long, required = true)]
        problem: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Dimension of the hash provider the markers are chosen for.
        #[arg(long, default_value_t = config::TEST_PROVIDER_DIM)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        provider_seed: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(out) = cli.out {
        cfg.paths.out = out;
    }
    let corpus = |c: Option<PathBuf>, cfg: &Config| c.unwrap_or_else(|| cfg.paths.corpus.clone());
    let check = |cfg: &Config| cfg.training.validate().map_err(|e| ConfigError(e.to_string()));

    match cli.command {
        Command::Ingest { corpus: c, seed } => pipeline::ingest(&cfg, &corpus(c, &cfg), seed),
        Command::Embed {
            provider,
            corpus: c,
            import,
            export,
        } => pipeline::embed(
            &cfg,
            pipeline::EmbedArgs {
                provider: &provider,
                corpus: c.as_deref(),
                import: import.as_deref(),
                export: export.as_deref(),
            },
        ),
        Command::Train {
            problem,
            provider,
            corpus: c,
            seed,
            epochs,
            selection,
            split_seed,
            model,
        } => {
            if let Some(s) = seed {
                cfg.training.seed = s;
            }
            if let Some(e) = epochs {
                cfg.training.epochs_grid = e;
            }
            if let Some(s) = selection {
                cfg.training.selection_split = match s {
                    Selection::Validation => SelectionSplit::Validation,
                    Selection::Test => SelectionSplit::Test,
                };
            }
            check(&cfg)?;
            let corpus = corpus(c, &cfg);
            pipeline::train(
                &cfg,
                pipeline::TrainArgs {
                    problem: &problem,
                    provider: &provider,
                    corpus: &corpus,
                    split_seed,
                    model: model.as_deref(),
                },
            )
        }
        Command::Eval {
            problem,
            model,
            provider,
            corpus: c,
            split_seed,
        } => {
            let corpus = corpus(c, &cfg);
            pipeline::eval(
                &cfg,
                pipeline::EvalArgs {
                    problems: &problem,
                    model: model.as_deref(),
                    corpus: &corpus,
                    split_seed,
                    provider: provider.as_deref(),
                },
            )
        }
        Command::Sweep {
            problem,
            provider,
            corpus: c,
            seed,
            test_frac,
            sizes,
            epochs,
        } => {
            if let Some(e) = epochs {
                cfg.training.epochs_grid = e;
            }
            check(&cfg)?;
            let corpus = corpus(c, &cfg);
            pipeline::sweep(
                &cfg,
                pipeline::SweepArgs {
                    problem: &problem,
                    provider: &provider,
                    corpus: &corpus,
                    sweep: SweepConfig { test_frac, seed, sizes },
                },
            )
        }
        Command::Grade { model, input, provider } => pipeline::grade(&cfg, &model, &input, provider.as_deref()),
        Command::Serve {
            bind,
            provider,
            models,
            problems,
            log,
            static_dir,
            feedback,
            max_attempts,
        } => {
            serve::ServeOverrides {
                bind,
                provider,
                models,
                problems,
                log,
                static_dir,
                feedback,
                max_attempts,
            }
            .apply(&mut cfg);
            serve::serve(&cfg)
        }
        Command::Stats {
            log,
            roster,
            survey,
            min_chars,
            t_test,
        } => {
            let log = log.unwrap_or_else(|| cfg.paths.log.clone());
            stats::stats(
                &cfg,
                stats::StatsArgs {
                    log: &log,
                    roster: roster.as_deref(),
                    survey: survey.as_deref(),
                    min_chars,
                    t_test: match t_test {
                        TTest::Welch => TTestKind::Welch,
                        TTest::Paired => TTestKind::Paired,
                    },
                },
            )
        }
        Command::Synth {
            problem,
            n,
            dim,
            provider_seed,
            seed,
            output,
        } => pipeline::synth(
            &cfg,
            pipeline::SynthArgs {
                problems: &problem,
                n,
                dim,
                provider_seed,
                seed,
                output: &output,
            },
        ),
    }
}

/// Exit status and label for a failure, from the first recognizable cause.
fn categorize(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return (2, "config");
        }
        if cause.is::<EmbedError>() {
            return (4, "provider");
        }
        if cause.is::<proofgrade::corpus::CorpusError>()
            || cause.is::<proofgrade::attemptlog::LogError>()
            || cause.is::<proofgrade::studystats::StatsError>()
        {
            return (3, "input");
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return (3, "input");
            }
        }
    }
    (1, "runtime")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        _ => tracing::Level::DEBUG,
    };
    tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, label) = categorize(&e);
            eprintln!("error ({label}): {e:#}");
            ExitCode::from(code)
        }
    }
}
