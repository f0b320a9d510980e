use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use attrfuse::ensemble::PenaltyWeights;
use attrfuse::ingest::SyntheticConfig;
use attrfuse::pipeline::{
    cmd_calibrate, cmd_evaluate, cmd_generate, cmd_predict, cmd_sweep, cmd_train, cmd_train_all,
    EvalSet, ModelKind, PredictArgs, ReportArgs, TrainArgs, TrainOptions,
};
use attrfuse::tbn::OrientationMode;
use attrfuse::uts::TextModel;

#[derive(Parser)]
#[command(
    name = "attrfuse",
    version,
    about = "Predict global attributes for local catalog records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a model bundle for one global attribute (or all of them).
    Train(TrainCmd),
    /// Predict a catalog and export the abstention queue.
    Predict(PredictCmd),
    /// Pick the abstention threshold on a labeled split.
    Calibrate(CalibrateCmd),
    /// Report P-C / P-I / NP and accuracy at one threshold.
    Evaluate(EvaluateCmd),
    /// Report category percentages over a grid of thresholds.
    Sweep(SweepCmd),
    /// Sample a synthetic catalog from a random tree network.
    Generate(GenerateCmd),
}

fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    <[f64; 3]>::try_from(parts).map_err(|_| "expected three comma-separated fractions".to_string())
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Global attribute column of the label file.
    #[arg(long, required_unless_present = "all")]
    target: Option<String>,
    /// Train one bundle per attribute column of the label file.
    #[arg(long, conflicts_with_all = ["target", "states"])]
    all: bool,
    /// State labels, one per line; defaults to the distinct labels.
    #[arg(long)]
    states: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    eta: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// `rooted` or `exhaustive`.
    #[arg(long, default_value = "rooted")]
    orientation: OrientationMode,
    #[arg(long, default_value_t = 3)]
    ngram_max: usize,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda_pi: f64,
    #[arg(long, default_value_t = 0.25)]
    lambda_np: f64,
    #[arg(long, default_value_t = 0.05)]
    step: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Split in file order instead of shuffling.
    #[arg(long)]
    ordered_split: bool,
    #[arg(long, default_value = "0.6,0.2,0.2", value_parser = parse_ratios)]
    ratios: [f64; 3],
    /// Bundle file, or output directory with `--all`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictCmd {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    /// Override the bundle's threshold.
    #[arg(long)]
    tau: Option<f64>,
    /// `ensemble`, `sbm` or `uts`.
    #[arg(long, default_value = "ensemble")]
    model: ModelKind,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    queue: PathBuf,
}

#[derive(Args)]
struct ReportCommon {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// `train`, `validation`, `test` or `all`.
    #[arg(long)]
    split: Option<EvalSet>,
    #[arg(long, default_value = "ensemble")]
    model: ModelKind,
    #[arg(long)]
    lambda_pi: Option<f64>,
    #[arg(long)]
    lambda_np: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

impl ReportCommon {
    fn args(&self, default_set: EvalSet, tau: Option<f64>) -> ReportArgs {
        let weights = match (self.lambda_pi, self.lambda_np) {
            (None, None) => None,
            (pi, np) => {
                let d = PenaltyWeights::default();
                Some(PenaltyWeights {
                    lambda_pi: pi.unwrap_or(d.lambda_pi),
                    lambda_np: np.unwrap_or(d.lambda_np),
                })
            }
        };
        ReportArgs {
            bundle: self.bundle.clone(),
            catalog: self.catalog.clone(),
            labels: self.labels.clone(),
            set: self.split.unwrap_or(default_set),
            kind: self.model,
            weights,
            step: self.step,
            tau,
            temperatures: Vec::new(),
        }
    }
}

#[derive(Args)]
struct CalibrateCmd {
    #[command(flatten)]
    common: ReportCommon,
    /// Where to write the bundle carrying the calibrated threshold.
    #[arg(long)]
    bundle_out: PathBuf,
    /// Comma-separated softmax temperatures to choose from first.
    #[arg(long, value_delimiter = ',')]
    temperatures: Vec<f64>,
}

#[derive(Args)]
struct EvaluateCmd {
    #[command(flatten)]
    common: ReportCommon,
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct SweepCmd {
    #[command(flatten)]
    common: ReportCommon,
}

#[derive(Args)]
struct GenerateCmd {
    #[arg(long, default_value_t = 6)]
    nodes: usize,
    #[arg(long, default_value_t = 3)]
    states: usize,
    #[arg(long)]
    target_states: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    local_missing: f64,
    #[arg(long, default_value = "category")]
    target: String,
    #[arg(long)]
    group_by_target: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(c) => {
            let args = TrainArgs {
                catalog: c.catalog,
                labels: c.labels,
                target: c.target.clone().unwrap_or_default(),
                states: c.states,
                ratios: c.ratios,
                seed: c.seed,
                ordered: c.ordered_split,
                options: TrainOptions {
                    eta: c.eta,
                    alpha: c.alpha,
                    orientation: c.orientation,
                    text: TextModel {
                        ngram_max: c.ngram_max,
                        temperature: c.temperature,
                    },
                    tau: c.tau,
                    weights: PenaltyWeights {
                        lambda_pi: c.lambda_pi,
                        lambda_np: c.lambda_np,
                    },
                    step: c.step,
                },
            };
            if c.all {
                for (name, bundle) in cmd_train_all(&args, &c.out)? {
                    println!("{name}: {}", bundle.network.structure().render());
                }
            } else {
                let bundle = cmd_train(&args, &c.out)?;
                println!("{}", bundle.network.structure().render());
            }
        }
        Command::Predict(c) => {
            let summary = cmd_predict(&PredictArgs {
                bundle: c.bundle,
                catalog: c.catalog,
                tau: c.tau,
                kind: c.model,
                predictions: c.out,
                queue: c.queue,
            })?;
            println!(
                "committed {} abstained {}",
                summary.committed, summary.abstained
            );
        }
        Command::Calibrate(c) => {
            let mut args = c.common.args(
                EvalSet::Split(attrfuse::ingest::SplitPart::Validation),
                None,
            );
            args.temperatures = c.temperatures;
            let report = cmd_calibrate(&args, &c.common.out, &c.bundle_out)?;
            let sel = report.selected().categories;
            println!(
                "tau {} pc {:.2}% pi {:.2}% np {:.2}%",
                report.selected_tau, sel.pc_pct, sel.pi_pct, sel.np_pct
            );
        }
        Command::Evaluate(c) => {
            let args = c
                .common
                .args(EvalSet::Split(attrfuse::ingest::SplitPart::Test), c.tau);
            let m = cmd_evaluate(&args, &c.common.out)?;
            println!(
                "tau {} pc {:.2}% pi {:.2}% np {:.2}% accuracy {:.2}%",
                m.categories.tau,
                m.categories.pc_pct,
                m.categories.pi_pct,
                m.categories.np_pct,
                m.overall_accuracy_pct
            );
        }
        Command::Sweep(c) => {
            let args = c
                .common
                .args(EvalSet::Split(attrfuse::ingest::SplitPart::Test), None);
            let rows = cmd_sweep(&args, &c.common.out)?;
            println!("{} thresholds written", rows.len());
        }
        Command::Generate(c) => {
            if c.samples == 0 {
                bail!("generate: --samples must be at least 1");
            }
            let config = SyntheticConfig {
                nodes: c.nodes,
                states: c.states,
                target_states: c.target_states,
                samples: c.samples,
                description_noise: c.noise,
                local_missing: c.local_missing,
                seed: c.seed,
                target_name: c.target,
                group_by_target: c.group_by_target,
                ..SyntheticConfig::default()
            };
            cmd_generate(&config, &c.out_dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Library errors already render their cause chain.
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
