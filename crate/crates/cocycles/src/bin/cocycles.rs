//! Command-line interface: generate benchmark data, train and select
//! models, impute counterfactuals, and run full experiments.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use cocycles::benchgen::generate;
use cocycles::causal::{impute, Target};
use cocycles::cmmd::{fit_candidate, kfold_select, SelectedModel, TrainConfig};
use cocycles::cocycle::CocycleModel;
use cocycles::data::Dataset;
use cocycles::error::{CocycleError, Result};
use cocycles::harness::runner::{design_family, run_experiment, write_report};
use cocycles::harness::{candidates, csvio, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cocycles", about = "Counterfactual transport models and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config's seed base.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a synthetic design; writes dataset.csv and ground_truth.csv.
    Generate(Common),
    /// Fit the first method on the first hierarchy entry; writes model.json
    /// and loss_trace.csv.
    Train(Common),
    /// K-fold architecture selection; writes cv_report.json and model.json.
    Cv(Common),
    /// Impute counterfactuals with a persisted model; writes panel.csv.
    Impute(Common),
    /// Full multi-trial experiment; writes trials.csv and aggregate.json.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Overrides the config's trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
}

/// The experiment config plus CLI-only fields: an optional dataset to use
/// instead of the generated design, a model to impute with, and explicit
/// imputation targets.
#[derive(Deserialize)]
struct CliConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    #[serde(default)]
    dataset: Option<PathBuf>,
    #[serde(default)]
    model: Option<PathBuf>,
    #[serde(default)]
    targets: Option<Vec<Target>>,
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<CliConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg: CliConfig = serde_json::from_str(&text)?;
    cfg.experiment.validate()?;
    if let Some(s) = seed {
        cfg.experiment.seed_base = s;
    }
    Ok(cfg)
}

fn load_data(cfg: &CliConfig) -> Result<(Dataset, Option<cocycles::benchgen::GroundTruth>)> {
    match &cfg.dataset {
        Some(path) => Ok((csvio::read_dataset(path)?, None)),
        None => {
            let (d, t) = generate(&cfg.experiment.design)?;
            Ok((d, Some(t)))
        }
    }
}

fn cmd_generate(common: &Common) -> Result<()> {
    let cfg = load_config(&common.config, common.seed)?;
    let (data, truth) = generate(&cfg.experiment.design)?;
    std::fs::create_dir_all(&common.out)?;
    csvio::write_dataset(&common.out.join("dataset.csv"), &data)?;
    if let Some(t) = truth.transport.as_ref() {
        std::fs::write(
            common.out.join("true_transport.json"),
            serde_json::to_string_pretty(t)?,
        )?;
    }
    csvio::write_ground_truth(&common.out.join("ground_truth.csv"), &truth)?;
    println!("wrote {}", common.out.join("dataset.csv").display());
    Ok(())
}

fn cmd_train(common: &Common) -> Result<()> {
    let cfg = load_config(&common.config, common.seed)?;
    let (data, _) = load_data(&cfg)?;
    let method = cfg.experiment.methods[0];
    let loss = method.loss().ok_or_else(|| {
        CocycleError::InvalidConfig(format!("method `{}` has no training loss", method.name()))
    })?;
    let family = design_family(&cfg.experiment.design);
    let cands = candidates(
        &cfg.experiment.hierarchy[..1].to_vec(),
        data.y_dim(),
        data.x_dim() + data.z_dim(),
        family,
    )?;
    let seed = cfg.experiment.seed_base;
    let train = TrainConfig { seed, ..cfg.experiment.train.clone() };
    // refit through the training entry point to keep the loss trace
    let outcome = match loss {
        cocycles::cmmd::LossSpec::CmmdV | cocycles::cmmd::LossSpec::CmmdU => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let model = CocycleModel::new(
                cands[0].spec.clone(),
                data.layout(),
                cands[0].id.clone(),
                &mut rng,
            )?;
            let variant = if loss == cocycles::cmmd::LossSpec::CmmdV {
                cocycles::cmmd::CmmdVariant::V
            } else {
                cocycles::cmmd::CmmdVariant::U
            };
            let out = cocycles::cmmd::train_cocycle(model, &data, variant, &train)?;
            (out.model, out.loss_trace)
        }
        cocycles::cmmd::LossSpec::Nll(family) => {
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let scm = cocycles::cmmd::FlowScm::new(
                cands[0].spec.clone(),
                data.layout(),
                cands[0].id.clone(),
                family,
                &mut rng,
            )?;
            let out = cocycles::cmmd::train_scm(scm, &data, &train)?;
            (out.model.model, out.loss_trace)
        }
    };
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(common.out.join("model.json"), outcome.0.to_json()?)?;
    csvio::write_loss_trace(&common.out.join("loss_trace.csv"), &outcome.1)?;
    println!("wrote {}", common.out.join("model.json").display());
    Ok(())
}

fn cmd_cv(common: &Common) -> Result<()> {
    let cfg = load_config(&common.config, common.seed)?;
    let (data, _) = load_data(&cfg)?;
    let method = cfg.experiment.methods[0];
    let loss = method.loss().ok_or_else(|| {
        CocycleError::InvalidConfig(format!("method `{}` has no training loss", method.name()))
    })?;
    let family = design_family(&cfg.experiment.design);
    let cands = candidates(
        &cfg.experiment.hierarchy,
        data.y_dim(),
        data.x_dim() + data.z_dim(),
        family,
    )?;
    let train = TrainConfig { seed: cfg.experiment.seed_base, ..cfg.experiment.train.clone() };
    let out = if cands.len() == 1 {
        let model = fit_candidate(&cands[0], &data, loss, &train, train.seed)?;
        cocycles::cmmd::CvOutcome {
            report: cocycles::cmmd::CvReport {
                selected: cands[0].id.clone(),
                validation: vec![(cands[0].id.clone(), None)],
            },
            model,
        }
    } else {
        kfold_select(&cands, &data, &cfg.experiment.cv, loss, &train)?
    };
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(
        common.out.join("cv_report.json"),
        serde_json::to_string_pretty(&out.report)?,
    )?;
    let model = match out.model {
        SelectedModel::Cocycle(m) => m,
        SelectedModel::Scm(s) => s.model,
    };
    std::fs::write(common.out.join("model.json"), model.to_json()?)?;
    println!("selected {}", out.report.selected);
    Ok(())
}

fn cmd_impute(common: &Common) -> Result<()> {
    let cfg = load_config(&common.config, common.seed)?;
    let (data, truth) = load_data(&cfg)?;
    let model_path = cfg.model.clone().ok_or_else(|| {
        CocycleError::InvalidConfig("impute needs a `model` path in the config".into())
    })?;
    let model = CocycleModel::from_json(&std::fs::read_to_string(model_path)?)?;
    let targets = match (&cfg.targets, &truth) {
        (Some(t), _) => t.clone(),
        (None, Some(t)) => t.targets.clone(),
        (None, None) => {
            return Err(CocycleError::InvalidConfig(
                "impute needs `targets` when reading a dataset file".into(),
            ))
        }
    };
    let panel = impute(&model, &data, &targets)?;
    std::fs::create_dir_all(&common.out)?;
    csvio::write_panel(&common.out.join("panel.csv"), &panel)?;
    println!("wrote {}", common.out.join("panel.csv").display());
    Ok(())
}

fn cmd_experiment(common: &Common, trials: Option<usize>) -> Result<()> {
    let mut cfg = load_config(&common.config, common.seed)?;
    if let Some(t) = trials {
        cfg.experiment.trials = t;
    }
    let report = run_experiment(&cfg.experiment)?;
    write_report(&common.out, &report)?;
    for agg in &report.aggregates {
        println!(
            "{}: ok={} failed={} ks_int={:.4?} cf_rmse={:.4?}",
            agg.method, agg.trials_ok, agg.trials_failed, agg.ks_int_mean, agg.cf_rmse_mean
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => cmd_generate(c),
        Command::Train(c) => cmd_train(c),
        Command::Cv(c) => cmd_cv(c),
        Command::Impute(c) => cmd_impute(c),
        Command::Experiment { common, trials } => cmd_experiment(common, *trials),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // machine-readable error record on stderr
            eprintln!("{}", serde_json::json!({ "error": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
