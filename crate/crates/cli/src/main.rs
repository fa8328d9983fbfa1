use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;

use clap::{Args, Parser, Subcommand};
use skyfusion::pipeline::{
    cmd_compare_baselines, cmd_evaluate, cmd_fetch, cmd_predict, cmd_prepare, cmd_train, config_keys,
    PipelineConfig, StageOutcome, DEFAULT_CONFIG_PATH,
};

fn keys_help() -> &'static str {
    static TEXT: OnceLock<String> = OnceLock::new();
    TEXT.get_or_init(|| {
        let mut s = String::from("Config keys accepted by --set (shown with defaults):\n");
        for (key, default) in config_keys() {
            let default = if default.len() > 60 {
                format!("{}…", &default[..default.char_indices().nth(57).map_or(default.len(), |(i, _)| i)])
            } else {
                default
            };
            s.push_str(&format!("  {key} = {default}\n"));
        }
        s
    })
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline config file (JSON). The default path is optional; an
    /// explicit one must exist.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config value, e.g. `--set train.epochs=3`. Values are
    /// read as JSON when they parse, otherwise as strings. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Galaxy / quasar / star classification from sky cutouts and catalog
/// features.
#[derive(Debug, Parser)]
#[command(name = "skyfusion", version, after_long_help = keys_help(), after_help = keys_help())]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Download the catalog and cutouts into the data directory.
    #[command(after_help = keys_help())]
    Fetch,
    /// Validate, split and standardize the fetched catalog.
    #[command(after_help = keys_help())]
    Prepare,
    /// Train the configured model; writes checkpoint, curves and model description.
    #[command(after_help = keys_help())]
    Train,
    /// Score the trained model on the validation split.
    #[command(after_help = keys_help())]
    Evaluate,
    /// Classify the objects of a catalog CSV.
    #[command(after_help = keys_help())]
    Predict {
        /// Catalog CSV; the class column may be left blank.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Destination CSV (default: <output.dir>/predictions.csv).
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Rank logistic regression, naive Bayes, kNN and the tabular ANN.
    #[command(after_help = keys_help())]
    CompareBaselines,
}

fn load_config(common: &Common) -> skyfusion::Result<PipelineConfig> {
    let file = match &common.config {
        Some(path) => Some(path.as_path()),
        None => Some(Path::new(DEFAULT_CONFIG_PATH)).filter(|p| p.is_file()),
    };
    PipelineConfig::resolve(file, &common.overrides)
}

fn run(cli: &Cli) -> skyfusion::Result<StageOutcome> {
    let cfg = load_config(&cli.common)?;
    match &cli.command {
        Command::Fetch => cmd_fetch(&cfg),
        Command::Prepare => cmd_prepare(&cfg),
        Command::Train => cmd_train(&cfg),
        Command::Evaluate => cmd_evaluate(&cfg),
        Command::Predict { input, output } => cmd_predict(&cfg, input, output.as_deref()),
        Command::CompareBaselines => cmd_compare_baselines(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            for path in &outcome.artifacts {
                println!("wrote {}", path.display());
            }
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
