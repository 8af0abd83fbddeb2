use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ood_relabel::detect::{read_detection_report, write_detection_report};
use ood_relabel::features::cache::cached_log_mel;
use ood_relabel::features::FeatureParams;
use ood_relabel::nn::Checkpoint;
use ood_relabel::pipeline::{
    auxiliary_predictions, load_data, prepare_trial, relabel_stage, run_detection, run_experiment_suite,
    run_pipeline, train_auxiliary, DataSource, PipelineConfig, System, Thresholds, AUX_CHECKPOINT,
    AUX_PREDICTIONS, DETECTION_REPORT, RELABEL_MANIFEST, SUITE_CSV, SUITE_TABLE,
};
use ood_relabel::relabel::{read_predictions, write_predictions, write_relabel_manifest};

#[derive(Parser)]
#[command(name = "ood-relabel", version, about = "Detect and relabel out-of-distribution training data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial of one system and print its metrics.
    Run(Common),
    /// Run several systems on the same data and seeds.
    Suite {
        #[command(flatten)]
        common: Common,
        /// Comma-separated systems; all nine when omitted.
        #[arg(long, value_delimiter = ',')]
        systems: Vec<System>,
    },
    /// Train the auxiliary classifier and write the detection report.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Build the relabel manifest from a detection report.
    Relabel {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Compute log-mel features for a manifest and store them in a cache.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        audio_root: PathBuf,
        #[arg(long)]
        cache_dir: PathBuf,
        /// Pipeline config whose manifest feature settings to use.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    system: Option<System>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> Result<PipelineConfig> {
        let mut config = PipelineConfig::load(&self.config)
            .with_context(|| format!("loading config {}", self.config.display()))?;
        if let Some(system) = self.system {
            config.system = system;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        config.validate()?;
        Ok(config)
    }
}

fn output_dir(config: &PipelineConfig) -> Result<&Path> {
    match &config.output_dir {
        Some(dir) => Ok(dir),
        None => bail!("no output directory: pass --out or set output_dir in the config"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let config = common.load()?;
            let run = run_pipeline(&config)?;
            print!("{}", ood_relabel::eval::report_table(std::slice::from_ref(&run.summary)));
        }
        Command::Suite { common, systems } => {
            let base = common.load()?;
            let systems = if systems.is_empty() { System::ALL.to_vec() } else { systems };
            let configs: Vec<PipelineConfig> = systems
                .into_iter()
                .map(|system| PipelineConfig { system, ..base.clone() })
                .collect();
            let report = run_experiment_suite(&configs)?;
            print!("{}", report.table());
            if let Some(dir) = &base.output_dir {
                eprintln!("wrote {} and {}", dir.join(SUITE_CSV).display(), dir.join(SUITE_TABLE).display());
            }
        }
        Command::Detect { common, trial } => {
            let config = common.load()?;
            if !config.system.uses_detection() {
                bail!("system {} has no detection stage; use ood_r or ood_rd", config.system);
            }
            let dir = config.trial_dir(trial).context("detect needs --out")?;
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let data = prepare_trial(&config, trial, load_data(&config.data, trial)?)?;
            let aux = train_auxiliary(&config, &data)?;
            let detection = run_detection(&config, &aux, &data)?;
            write_detection_report(&dir.join(DETECTION_REPORT), &detection.outcomes)?;
            write_predictions(&dir.join(AUX_PREDICTIONS), &auxiliary_predictions(&aux, &data.noisy)?)?;
            Checkpoint::new(&aux, None).save(&dir.join(AUX_CHECKPOINT))?;
            let count = |f: fn(&ood_relabel::detect::DetectionOutcome) -> bool| {
                detection.outcomes.iter().filter(|o| f(o)).count()
            };
            println!(
                "theta={} tau={} |S_theta|={} |S_tau|={} of {} noisy instances",
                detection.thresholds.theta,
                detection.thresholds.tau,
                count(|o| o.in_s_theta),
                count(|o| o.in_s_tau),
                detection.outcomes.len()
            );
            println!("wrote {}", dir.display());
        }
        Command::Relabel {
            common,
            trial,
            detections,
            predictions,
        } => {
            let config = common.load()?;
            let out = output_dir(&config)?;
            std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
            let data = prepare_trial(&config, trial, load_data(&config.data, trial)?)?;
            let outcomes = read_detection_report(&detections)?;
            let preds = read_predictions(&predictions)?;
            let thresholds = Thresholds {
                theta: config.theta,
                tau: config.tau,
                validation_detected: None,
            };
            let (corpus, plan) = relabel_stage(&config, &data, &outcomes, &preds, &thresholds)?;
            let path = out.join(RELABEL_MANIFEST);
            write_relabel_manifest(&path, &plan)?;
            println!("{} training instances; wrote {}", corpus.len(), path.display());
        }
        Command::Features {
            manifest,
            audio_root,
            cache_dir,
            config,
        } => {
            let params = match config {
                Some(path) => match PipelineConfig::load(&path)?.data {
                    DataSource::Manifest { features, .. } => features,
                    DataSource::Synthetic { .. } => bail!("{} has no manifest data source", path.display()),
                },
                None => FeatureParams::default(),
            };
            extract_features(&manifest, &audio_root, &cache_dir, &params)?;
        }
    }
    Ok(())
}

fn extract_features(manifest: &Path, audio_root: &Path, cache_dir: &Path, params: &FeatureParams) -> Result<()> {
    let corpus = ood_relabel::data::load_manifest(manifest, audio_root, None)?;
    let (mut hits, mut misses) = (0, 0);
    for inst in corpus.instances() {
        let (_, hit) = cached_log_mel(&audio_root.join(&inst.id), params, cache_dir)?;
        if hit {
            hits += 1;
        } else {
            misses += 1;
        }
    }
    println!("{} clips: {hits} cached, {misses} computed", hits + misses);
    Ok(())
}

/// The error and its causes, skipping causes already quoted by a parent.
fn diagnostic(e: &anyhow::Error) -> String {
    let mut msg = e.to_string();
    for cause in e.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", diagnostic(&e));
            ExitCode::FAILURE
        }
    }
}
