//! `abusedet`: corpus generation, feature extraction, training, evaluation
//! and scoring from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use abusedet::config::{Arm, KindSelection};
use abusedet::corpus::BalanceMode;
use abusedet::{PrepMode, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abusedet", version, about = "Abusive message detection for game chat")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of `--config` (or the defaults).
#[derive(Args)]
struct Common {
    /// JSON run configuration; absent fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for folds, importance runs and ablation steps.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// iM, cM or both.
    #[arg(long, global = true)]
    kinds: Option<KindSelection>,
    /// balanced or unbalanced.
    #[arg(long, global = true, value_parser = parse_balance)]
    balance: Option<BalanceMode>,
    /// basic or advanced.
    #[arg(long, global = true)]
    prep: Option<PrepMode>,
    /// classic or full.
    #[arg(long, global = true)]
    arm: Option<Arm>,
    /// Number of cross-validation folds.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Probability threshold for flagging a message.
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

fn parse_balance(s: &str) -> Result<BalanceMode, String> {
    match s {
        "balanced" => Ok(BalanceMode::Balanced),
        "unbalanced" => Ok(BalanceMode::Unbalanced),
        other => Err(format!("unknown balance mode '{other}' (balanced, unbalanced)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus as JSONL.
    Gen {
        #[arg(long, default_value_t = 779)]
        abuse: usize,
        #[arg(long, default_value_t = 1558)]
        nonabuse: usize,
        #[arg(long)]
        obfuscation_rate: Option<f64>,
        /// JSON generator settings; flags above take precedence.
        #[arg(long)]
        synth_config: Option<PathBuf>,
        #[arg(short, long, default_value = "corpus.jsonl")]
        output: PathBuf,
    },
    /// Write the feature matrix of the dataset with its train/test split.
    Extract {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(short, long, default_value = "features.csv")]
        output: PathBuf,
    },
    /// Train on the train split and save the model.
    Train {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(short, long, default_value = "model.json")]
        output: PathBuf,
    },
    /// Cross-validate the configured arm.
    Eval {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(short, long, default_value = "metrics.csv")]
        output: PathBuf,
    },
    /// Per-fold and averaged precision-recall curves.
    Prcurve {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(short, long, default_value = "prcurve.csv")]
        output: PathBuf,
    },
    /// Tree-ensemble feature importances over repeated runs.
    Importance {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(short, long, default_value = "importance.csv")]
        output: PathBuf,
    },
    /// F-measure as features are removed by increasing importance.
    Ablate {
        #[arg(long, default_value = "corpus.jsonl")]
        corpus: PathBuf,
        /// Importance runs used to order the features.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(short, long, default_value = "ablation.csv")]
        output: PathBuf,
    },
    /// Score messages with a saved model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        /// Corpus whose messages are scored with their context.
        #[arg(long, conflicts_with = "text", required_unless_present = "text")]
        corpus: Option<PathBuf>,
        /// A single message, scored without context.
        #[arg(long)]
        text: Option<String>,
        /// Output CSV; standard output when absent.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Failure reported as one line on standard error.
pub enum Failure {
    Usage(String),
    Core(abusedet::Error),
}

impl From<abusedet::Error> for Failure {
    fn from(e: abusedet::Error) -> Self {
        Failure::Core(e)
    }
}

fn resolve(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.kinds {
        cfg.kinds = v;
    }
    if let Some(v) = common.balance {
        cfg.balance = v;
    }
    if let Some(v) = common.prep {
        cfg.prep_mode = v;
    }
    if let Some(v) = common.arm {
        cfg.arm = v;
    }
    if let Some(v) = common.k {
        cfg.k_folds = v;
    }
    if let Some(v) = common.threshold {
        cfg.threshold = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;
    }
    let mut cfg = resolve(&cli.common)?;
    match cli.command {
        Command::Gen {
            abuse,
            nonabuse,
            obfuscation_rate,
            synth_config,
            output,
        } => commands::gen(&cfg, abuse, nonabuse, obfuscation_rate, synth_config.as_deref(), &output),
        Command::Extract { corpus, output } => commands::extract(&cfg, &corpus, &output),
        Command::Train { corpus, output } => commands::train(&cfg, &corpus, &output),
        Command::Eval { corpus, output } => commands::eval(&cfg, &corpus, &output),
        Command::Prcurve { corpus, output } => commands::prcurve(&cfg, &corpus, &output),
        Command::Importance { corpus, runs, output } => {
            if let Some(r) = runs {
                cfg.importance_runs = r;
            }
            commands::importance(&cfg, &corpus, &output)
        }
        Command::Ablate { corpus, runs, output } => {
            if let Some(r) = runs {
                cfg.importance_runs = r;
            }
            commands::ablate(&cfg, &corpus, &output)
        }
        Command::Classify {
            model,
            corpus,
            text,
            output,
        } => commands::classify(&cfg, &model, corpus.as_deref(), text.as_deref(), output.as_deref()),
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("error kind=usage message=\"{}\"", one_line(&e.to_string()).replace('"', "'"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error kind=usage message=\"{}\"", one_line(&msg).replace('"', "'"));
            ExitCode::from(2)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error kind={} message=\"{}\"", e.kind(), one_line(&e.to_string()).replace('"', "'"));
            ExitCode::from(1)
        }
    }
}
