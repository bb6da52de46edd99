use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcgrad_cli::{
    cmd_bench, cmd_evaluate, cmd_fit, cmd_predict, BenchArgs, CliError, CliResult, EvaluateArgs,
    Override, Suite,
};
use serde_json::{json, Value};

/// Multicalibration by recursive gradient boosting.
///
/// `fit` also accepts dotted overrides of any config key, for example
/// `--calibrator.params.max_rounds=10`.
#[derive(Debug, Parser)]
#[command(name = "mcgrad", version)]
struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a base model and calibrator from a JSON run config.
    Fit(FitArgs),
    /// Score a CSV file with a saved model.json.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV with row_index, base_score, calibrated_score.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute calibration and performance metrics for a score file.
    Evaluate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value = "calibrated_score")]
        score_column: String,
        /// CSV holding the label column (and feature columns when --groups is set).
        #[arg(long, visible_alias = "data")]
        labels: PathBuf,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long)]
        weight_column: Option<String>,
        /// JSON groups section, e.g. {"mode": "unspecified"}.
        #[arg(long)]
        groups: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the method comparison and ablation grid.
    Bench {
        #[arg(long, value_enum, default_value_t = SuiteArg::Synthetic)]
        suite: SuiteArg,
        /// JSON bench file: settings, datasets, seeds, methods, variants.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Number of seeds (0..N).
        #[arg(long)]
        seeds: Option<u64>,
        /// Rows per dataset of the built-in synthetic suite.
        #[arg(long, default_value_t = 20_000)]
        rows: usize,
        #[arg(long)]
        no_ablation: bool,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SuiteArg {
    Synthetic,
    Csv,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Run config (JSON).
    config: PathBuf,
    /// Overrides `output_dir`; relative to the working directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    valid_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_rescale: bool,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    num_leaves: Option<usize>,
    #[arg(long)]
    min_child_samples: Option<usize>,
    #[arg(long)]
    min_sum_hessian_in_leaf: Option<f64>,
    #[arg(long)]
    lambda_l2: Option<f64>,
    #[arg(long)]
    min_gain_to_split: Option<f64>,
    #[arg(long)]
    max_bins: Option<usize>,
}

impl FitArgs {
    /// The named flags as dotted overrides of the mcgrad calibrator section.
    fn overrides(&self) -> CliResult<Vec<Override>> {
        let mut out = Vec::new();
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push(Override::new(key, v));
            }
        };
        let p = "calibrator.params";
        set(
            &format!("{p}.max_rounds"),
            self.max_rounds.map(|v| json!(v)),
        );
        set(
            &format!("{p}.valid_fraction"),
            self.valid_fraction.map(|v| json!(v)),
        );
        set(&format!("{p}.seed"), self.seed.map(|v| json!(v)));
        set(
            &format!("{p}.rescale_enabled"),
            self.no_rescale.then(|| json!(false)),
        );
        let g = format!("{p}.gbdt");
        set(
            &format!("{g}.learning_rate"),
            self.learning_rate.map(|v| json!(v)),
        );
        set(
            &format!("{g}.n_estimators"),
            self.n_estimators.map(|v| json!(v)),
        );
        set(&format!("{g}.max_depth"), self.max_depth.map(|v| json!(v)));
        set(
            &format!("{g}.num_leaves"),
            self.num_leaves.map(|v| json!(v)),
        );
        set(
            &format!("{g}.min_child_samples"),
            self.min_child_samples.map(|v| json!(v)),
        );
        set(
            &format!("{g}.min_sum_hessian_in_leaf"),
            self.min_sum_hessian_in_leaf.map(|v| json!(v)),
        );
        set(&format!("{g}.lambda_l2"), self.lambda_l2.map(|v| json!(v)));
        set(
            &format!("{g}.min_gain_to_split"),
            self.min_gain_to_split.map(|v| json!(v)),
        );
        set(&format!("{g}.max_bins"), self.max_bins.map(|v| json!(v)));
        if let Some(dir) = &self.output_dir {
            let abs = std::path::absolute(dir).map_err(CliError::config)?;
            out.push(Override::new("output_dir", json!(abs)));
        }
        Ok(out)
    }
}

fn run(cli: Cli, dotted: Vec<Override>) -> CliResult<()> {
    if !dotted.is_empty() && !matches!(cli.command, Command::Fit(_)) {
        return Err(CliError::Config(
            "dotted overrides only apply to `fit`".into(),
        ));
    }
    match cli.command {
        Command::Fit(args) => {
            let mut overrides = args.overrides()?;
            overrides.extend(dotted);
            let outcome = cmd_fit(&args.config, &overrides)?;
            log::info!("wrote {}", outcome.output_dir.display());
        }
        Command::Predict { model, data, out } => {
            let n = cmd_predict(&model, &data, &out)?;
            log::info!("scored {n} rows into {}", out.display());
        }
        Command::Evaluate {
            scores,
            score_column,
            labels,
            label_column,
            weight_column,
            groups,
            out,
        } => {
            cmd_evaluate(&EvaluateArgs {
                scores,
                score_column,
                labels,
                label_column,
                weight_column,
                groups,
                out,
            })?;
        }
        Command::Bench {
            suite,
            config,
            out,
            seeds,
            rows,
            no_ablation,
        } => {
            let failures = cmd_bench(&BenchArgs {
                suite: match suite {
                    SuiteArg::Synthetic => Suite::Synthetic,
                    SuiteArg::Csv => Suite::Csv,
                },
                config,
                out,
                n_seeds: seeds,
                n_rows: rows,
                ablation: !no_ablation,
            })?;
            if failures > 0 {
                log::warn!("{failures} benchmark cells failed");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let mut args = std::env::args();
    let mut rest: Vec<String> = args.next().into_iter().collect();
    let mut dotted = Vec::new();
    for a in args {
        if Override::is_override(&a) {
            dotted.push(a);
        } else {
            rest.push(a);
        }
    }
    let cli = Cli::parse_from(rest);
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let result = dotted
        .iter()
        .map(|a| Override::parse(a))
        .collect::<CliResult<Vec<_>>>()
        .and_then(|d| run(cli, d));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mcgrad: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
