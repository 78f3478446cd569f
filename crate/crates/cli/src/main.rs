//! `faultlab`: generate fault-labeled RSRP map datasets, train the four
//! classifiers, and emit evaluation report CSVs.
//!
//! Exit codes: 0 success, 1 check failure (gradcheck), 2 usage or
//! configuration error.

mod config;
mod manifest;
mod pipeline;
mod report;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};

use faultlab_core::cnn::{gradient_check, CnnConfig};
use faultlab_core::imaging::ColorMode;
use faultlab_core::nef::{solve_decoders, Connection, Ensemble};

use config::RunConfig;
use pipeline::{EvalSplit, ModelKind};

#[derive(Parser)]
#[command(name = "faultlab", version, about = "Synthetic cellular fault-map laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum ColorArg {
    Gray,
    Rgb,
}

impl From<ColorArg> for ColorMode {
    fn from(value: ColorArg) -> ColorMode {
        match value {
            ColorArg::Gray => ColorMode::Gray,
            ColorArg::Rgb => ColorMode::Rgb,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the labeled dataset: images plus manifest.csv.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model on the 70% split and persist it.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long, value_enum, default_value_t = ColorArg::Gray)]
        color: ColorArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a stored model on the held-out 30% split.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: ModelKind,
        #[arg(long, value_enum, default_value_t = ColorArg::Gray)]
        color: ColorArg,
        /// Which split to evaluate; `train` needs --allow-train.
        #[arg(long, value_enum, default_value_t = EvalSplit::Test)]
        split: EvalSplit,
        /// Permit evaluating on the training split.
        #[arg(long)]
        allow_train: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate all four models in every configured color mode.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the CNN gradient check and the NEF identity-decode check.
    Gradcheck {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: &Path, out_override: Option<PathBuf>) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(out) = out_override {
        config.out_dir = out;
    }
    config.validate()?;
    Ok(config)
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Generate { config, out } => {
            let config = load_config(&config, out)?;
            let count = pipeline::generate(&config)?;
            println!(
                "generated {count} samples under {}",
                config.out_dir.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Train {
            config,
            model,
            color,
            out,
        } => {
            let config = load_config(&config, out)?;
            let path = pipeline::train_and_save(&config, model, color.into())?;
            println!("trained {} -> {}", model.name(), path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate {
            config,
            model,
            color,
            split,
            allow_train,
            out,
        } => {
            let config = load_config(&config, out)?;
            if split == EvalSplit::Train && !allow_train {
                return Err(anyhow!(
                    "refusing to evaluate on the training split without --allow-train"
                ));
            }
            let report = pipeline::evaluate_saved(&config, model, color.into(), split)?;
            let reports_dir = config.out_dir.join("reports");
            let report_path = reports_dir.join(report::report_name(model.name(), color.into()));
            let mut sink = pipeline::create_new(&report_path)?;
            sink.write_all(report::render_report(&report).as_bytes())?;
            sink.flush()?;
            let confusion_path =
                reports_dir.join(report::confusion_name(model.name(), color.into()));
            let mut sink = pipeline::create_new(&confusion_path)?;
            sink.write_all(report::render_confusion(&report.confusion).as_bytes())?;
            sink.flush()?;
            println!(
                "{} {}: accuracy {:.4}, kappa {:.4} -> {}",
                model.name(),
                ColorMode::from(color).name(),
                report.accuracy,
                report.kappa,
                report_path.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { config, out } => {
            let config = load_config(&config, out)?;
            let reports = pipeline::compare(&config)?;
            let reports_dir = config.out_dir.join("reports");
            let mut sink = pipeline::create_new(&reports_dir.join("comparison.csv"))?;
            sink.write_all(report::render_comparison(&reports).as_bytes())?;
            sink.flush()?;
            let rf_reports: Vec<&faultlab_core::eval::EvaluationReport> = reports
                .iter()
                .filter(|r| r.model_name == "rf")
                .collect();
            let mut sink = pipeline::create_new(&reports_dir.join("rf_per_fault.csv"))?;
            sink.write_all(report::render_per_fault(&rf_reports).as_bytes())?;
            sink.flush()?;
            for r in &reports {
                if let Some(history) = &r.loss_history {
                    let mut sink =
                        pipeline::create_new(&reports_dir.join(report::loss_name(r.color_mode)))?;
                    sink.write_all(report::render_loss_history(history).as_bytes())?;
                    sink.flush()?;
                }
                println!(
                    "{} {}: accuracy {:.4}, kappa {:.4}",
                    r.model_name,
                    r.color_mode.name(),
                    r.accuracy,
                    r.kappa
                );
            }
            println!("reports written to {}", reports_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Gradcheck { config } => {
            let config = load_config(&config, None)?;
            let mut ok = true;

            let check_config = CnnConfig {
                in_channels: 1,
                in_height: 8,
                in_width: 8,
                conv1_filters: 2,
                conv2_filters: 3,
                ..CnnConfig::default()
            };
            let max_rel = gradient_check(&check_config, config.cnn.seed)
                .map_err(|e| anyhow!("gradient check: {e}"))?;
            let cnn_pass = max_rel <= 1e-4;
            ok &= cnn_pass;
            println!(
                "cnn gradient check: max relative error {max_rel:.3e} ({})",
                if cnn_pass { "pass" } else { "FAIL" }
            );

            let ensemble = Ensemble::new(100, 1, config.nef.lif, config.nef.seed)
                .map_err(|e| anyhow!("nef check: {e}"))?;
            let eval_points: Vec<Vec<f64>> = (0..500)
                .map(|k| vec![-1.0 + 2.0 * k as f64 / 499.0])
                .collect();
            let decoders = solve_decoders(&ensemble, &eval_points, &eval_points, 0.1)
                .map_err(|e| anyhow!("nef check: {e}"))?;
            let conn = Connection {
                decoders,
                out_dim: 1,
                synapse_tau: config.nef.synapse_tau,
            };
            let mut sq_sum = 0.0;
            for point in &eval_points {
                let decoded = conn.decode(
                    &ensemble
                        .rates(point)
                        .map_err(|e| anyhow!("nef check: {e}"))?,
                );
                sq_sum += (decoded[0] - point[0]).powi(2);
            }
            let rmse = (sq_sum / eval_points.len() as f64).sqrt();
            let nef_pass = rmse <= 0.05;
            ok &= nef_pass;
            println!(
                "nef identity decode: rmse {rmse:.4} ({})",
                if nef_pass { "pass" } else { "FAIL" }
            );

            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}
