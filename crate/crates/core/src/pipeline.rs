//! Configuration and orchestration of the four-stage pipeline: train the
//! auxiliary classifier on verified data, detect, relabel, then train and
//! evaluate the primary classifier.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    generate_synthetic_corpus, generate_test_corpus, load_manifest, partition_clean_noisy,
    split_validation, LabeledCorpus, Payload, SoftLabel, SyntheticSpec,
};
use crate::detect::{
    calibrate_from_scores, detected_fraction, read_detection_report, score_corpus,
    write_detection_report, DetectionOutcome, OdinParams, ThresholdSide,
};
use crate::error::{Error, Result};
use crate::eval::{accuracy, aggregate_trials, micro_average_precision, report_csv, report_table, SystemSummary, TrialResult};
use crate::features::cache::cached_log_mel;
use crate::features::{extract_corpus, partition_blocks, FeatureParams};
use crate::nn::{train, Activation, Architecture, Augmentation, Checkpoint, Classifier, ConvSpec, LossChoice, TrainConfig};
use crate::relabel::{
    apply_plan, plan_relabel, read_predictions, write_predictions, write_relabel_manifest, PolicyKind,
    RelabelEntry, RelabelPolicy,
};

/// Keeps the auxiliary model's random streams apart from the primary's.
const AUX_SEED_SALT: u64 = 0xa0c5_1a55_1f1e_0001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Clean,
    CleanDa,
    Baseline,
    OodR,
    OodRd,
    AllR,
    Bootstrap,
    Lq,
    NoiseLayer,
}

impl System {
    pub const ALL: [System; 9] = [
        System::Clean,
        System::CleanDa,
        System::Baseline,
        System::OodR,
        System::OodRd,
        System::AllR,
        System::Bootstrap,
        System::Lq,
        System::NoiseLayer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::Clean => "clean",
            System::CleanDa => "clean_da",
            System::Baseline => "baseline",
            System::OodR => "ood_r",
            System::OodRd => "ood_rd",
            System::AllR => "all_r",
            System::Bootstrap => "bootstrap",
            System::Lq => "lq",
            System::NoiseLayer => "noise_layer",
        }
    }

    pub fn policy_kind(self) -> PolicyKind {
        match self {
            System::Clean | System::CleanDa => PolicyKind::CleanOnly,
            System::Baseline | System::Bootstrap | System::Lq | System::NoiseLayer => PolicyKind::Baseline,
            System::OodR => PolicyKind::OodR,
            System::OodRd => PolicyKind::OodRd,
            System::AllR => PolicyKind::AllR,
        }
    }

    pub fn uses_aux(self) -> bool {
        self.policy_kind().needs_predictions()
    }

    pub fn uses_detection(self) -> bool {
        self.policy_kind().needs_detection()
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = System::ALL.iter().map(|s| s.name()).collect();
                Error::param("system", format!("unknown system {s:?}; valid: {}", valid.join(", ")))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    /// Regenerated per trial with `spec.seed + trial_index`.
    Synthetic {
        #[serde(default)]
        spec: SyntheticSpec,
        #[serde(default = "default_test_points")]
        test_points_per_class: usize,
    },
    Manifest {
        train_manifest: PathBuf,
        test_manifest: PathBuf,
        audio_root: PathBuf,
        #[serde(default)]
        cache_dir: Option<PathBuf>,
        #[serde(default)]
        features: FeatureParams,
    },
}

fn default_test_points() -> usize {
    100
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            spec: SyntheticSpec::default(),
            test_points_per_class: default_test_points(),
        }
    }
}

/// Layers of the classifier; input shape and class count come from data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub conv: Option<ConvSpec>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            conv: None,
            hidden: vec![32],
            activation: Activation::Relu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub system: System,
    pub theta: f64,
    pub tau: f64,
    pub lambda: f64,
    pub odin: OdinParams,
    pub train: TrainConfig,
    pub aux_train: TrainConfig,
    pub model: ModelConfig,
    /// Augmentation used by `clean_da`. Other systems use `train.augmentation`.
    pub clean_da_augmentation: Augmentation,
    pub trials: usize,
    /// Replace theta and tau by values swept on a verified hold-out set.
    pub calibrate_thresholds: bool,
    pub validation_per_class: usize,
    pub max_detect_fraction: f64,
    pub data: DataSource,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            system: System::Baseline,
            theta: 0.55,
            tau: 0.4,
            lambda: 0.5,
            odin: OdinParams::default(),
            train: TrainConfig::default(),
            aux_train: TrainConfig::default(),
            model: ModelConfig::default(),
            clean_da_augmentation: Augmentation::Masking,
            trials: 5,
            calibrate_thresholds: false,
            validation_per_class: 15,
            max_detect_fraction: 0.05,
            data: DataSource::default(),
            output_dir: None,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.tau && self.tau <= self.theta && self.theta < 1.0) {
            return Err(Error::param(
                "thresholds",
                format!("need 0 < tau <= theta < 1, got tau={} theta={}", self.tau, self.theta),
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", format!("{} not in [0, 1]", self.lambda)));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if !(self.max_detect_fraction > 0.0 && self.max_detect_fraction <= 1.0) {
            return Err(Error::param("max_detect_fraction", "must be in (0, 1]"));
        }
        if self.calibrate_thresholds && self.validation_per_class == 0 {
            return Err(Error::param("validation_per_class", "must be at least 1 when calibrating"));
        }
        self.odin.validate()?;
        self.train.validate()?;
        self.aux_train.validate()?;
        if let DataSource::Synthetic { spec, test_points_per_class } = &self.data {
            spec.validate()?;
            if *test_points_per_class == 0 {
                return Err(Error::param("test_points_per_class", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }

    pub fn policy(&self) -> RelabelPolicy {
        RelabelPolicy {
            kind: self.system.policy_kind(),
            lambda: self.lambda,
            theta: self.theta,
            tau: self.tau,
        }
    }

    /// Training settings of the primary classifier for this system.
    pub fn primary_train_config(&self, trial: usize) -> TrainConfig {
        let mut cfg = self.train.clone();
        cfg.seed = self.trial_seed(trial);
        match self.system {
            System::CleanDa => cfg.augmentation = self.clean_da_augmentation,
            System::Bootstrap => cfg.loss_kind = LossChoice::Bootstrap,
            System::Lq => cfg.loss_kind = LossChoice::Lq,
            System::NoiseLayer => cfg.use_noise_layer = true,
            _ => {}
        }
        cfg
    }

    pub fn aux_train_config(&self, trial: usize) -> TrainConfig {
        let mut cfg = self.aux_train.clone();
        cfg.seed = self.trial_seed(trial) ^ AUX_SEED_SALT;
        cfg
    }

    /// `<output_dir>/<system>/trial_<i>`, when an output directory is set.
    pub fn trial_dir(&self, trial: usize) -> Option<PathBuf> {
        self.output_dir
            .as_ref()
            .map(|d| d.join(self.system.name()).join(format!("trial_{trial}")))
    }
}

/// Training and test corpora with features in place.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub train: LabeledCorpus,
    pub test: LabeledCorpus,
}

fn manifest_blocks(
    corpus: LabeledCorpus,
    audio_root: &Path,
    cache_dir: Option<&Path>,
    params: &FeatureParams,
) -> Result<LabeledCorpus> {
    match cache_dir {
        None => extract_corpus(corpus, params),
        Some(dir) => corpus.map_payloads(|inst| {
            let (features, _) = cached_log_mel(&audio_root.join(&inst.id), params, dir)?;
            Ok(Payload::Blocks(partition_blocks(&features, params.block_length)))
        }),
    }
}

/// Loads or generates the corpora used by trial `trial`.
pub fn load_data(source: &DataSource, trial: usize) -> Result<LoadedData> {
    match source {
        DataSource::Synthetic { spec, test_points_per_class } => {
            let spec = SyntheticSpec {
                seed: spec.seed.wrapping_add(trial as u64),
                ..spec.clone()
            };
            Ok(LoadedData {
                train: generate_synthetic_corpus(&spec)?,
                test: generate_test_corpus(&spec, *test_points_per_class)?,
            })
        }
        DataSource::Manifest {
            train_manifest,
            test_manifest,
            audio_root,
            cache_dir,
            features,
        } => {
            let train = load_manifest(train_manifest, audio_root, None)?;
            let test = load_manifest(test_manifest, audio_root, Some(train.class_names()))?;
            let cache = cache_dir.as_deref();
            Ok(LoadedData {
                train: manifest_blocks(train, audio_root, cache, features)?,
                test: manifest_blocks(test, audio_root, cache, features)?,
            })
        }
    }
}

fn architecture(model: &ModelConfig, corpus: &LabeledCorpus) -> Result<Architecture> {
    let first = corpus.instances().first().ok_or(Error::EmptyCorpus)?;
    let block = first
        .blocks()?
        .first()
        .ok_or_else(|| Error::Format(format!("instance {:?} has no feature blocks", first.id)))?;
    let arch = Architecture {
        input_rows: block.nrows(),
        input_cols: block.ncols(),
        conv: model.conv,
        hidden: model.hidden.clone(),
        activation: model.activation,
        num_classes: corpus.num_classes(),
    };
    arch.validate()?;
    Ok(arch)
}

/// Corpora of one trial after the clean/noisy and validation splits.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub trial: usize,
    pub seed: u64,
    /// Verified instances used for training (the validation hold-out removed).
    pub clean: LabeledCorpus,
    pub validation: Option<LabeledCorpus>,
    pub noisy: LabeledCorpus,
    pub test: LabeledCorpus,
    pub architecture: Architecture,
}

pub fn prepare_trial(config: &PipelineConfig, trial: usize, data: LoadedData) -> Result<TrialData> {
    let seed = config.trial_seed(trial);
    let (clean, noisy) = partition_clean_noisy(&data.train)?;
    let (clean, validation) = if config.calibrate_thresholds && config.system.uses_detection() {
        let (rest, validation) = split_validation(&clean, config.validation_per_class, seed)?;
        if rest.is_empty() {
            return Err(Error::NoVerifiedInstances);
        }
        (rest, Some(validation))
    } else {
        (clean, None)
    };
    let architecture = architecture(&config.model, &data.train)?;
    Ok(TrialData {
        trial,
        seed,
        clean,
        validation,
        noisy,
        test: data.test,
        architecture,
    })
}

/// Stage 1: the auxiliary classifier, trained on verified data only.
pub fn train_auxiliary(config: &PipelineConfig, data: &TrialData) -> Result<Classifier> {
    let cfg = config.aux_train_config(data.trial);
    let mut aux = Classifier::new(data.architecture.clone(), cfg.seed)?;
    train(&mut aux, &data.clean, &cfg)?;
    Ok(aux)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta: f64,
    pub tau: f64,
    /// Validation fractions detected at the chosen thresholds, when calibrated.
    pub validation_detected: Option<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct DetectionStage {
    pub thresholds: Thresholds,
    pub outcomes: Vec<DetectionOutcome>,
}

/// Stage 2: thresholds (configured or swept on validation) and detection
/// over the noisy instances.
pub fn run_detection(config: &PipelineConfig, aux: &Classifier, data: &TrialData) -> Result<DetectionStage> {
    let thresholds = match &data.validation {
        Some(validation) => {
            let scores = score_corpus(aux, validation, &config.odin)?;
            let theta = calibrate_from_scores(&scores, ThresholdSide::Upper, config.max_detect_fraction)?;
            let tau = calibrate_from_scores(&scores, ThresholdSide::Lower, config.max_detect_fraction)?
                .min(theta);
            Thresholds {
                theta,
                tau,
                validation_detected: Some((
                    detected_fraction(&scores, ThresholdSide::Upper, theta),
                    detected_fraction(&scores, ThresholdSide::Lower, tau),
                )),
            }
        }
        None => Thresholds {
            theta: config.theta,
            tau: config.tau,
            validation_detected: None,
        },
    };
    let scores = score_corpus(aux, &data.noisy, &config.odin)?;
    let outcomes = crate::detect::apply_thresholds(&scores, thresholds.theta, thresholds.tau)?;
    Ok(DetectionStage { thresholds, outcomes })
}

/// Plain clip-level predictions of the auxiliary classifier on the noisy
/// instances, in corpus order.
pub fn auxiliary_predictions(aux: &Classifier, noisy: &LabeledCorpus) -> Result<Vec<(String, SoftLabel)>> {
    noisy
        .instances()
        .par_iter()
        .map(|inst| Ok((inst.id.clone(), aux.predict_clip(inst.blocks()?)?)))
        .collect()
}

/// Stage 3: the relabel plan and the resulting primary training set.
pub fn relabel_stage(
    config: &PipelineConfig,
    data: &TrialData,
    detections: &[DetectionOutcome],
    predictions: &[(String, SoftLabel)],
    thresholds: &Thresholds,
) -> Result<(LabeledCorpus, Vec<RelabelEntry>)> {
    let policy = RelabelPolicy {
        theta: thresholds.theta,
        tau: thresholds.tau,
        ..config.policy()
    };
    let lookup: HashMap<String, SoftLabel> = predictions.iter().cloned().collect();
    let plan = plan_relabel(&policy, &data.clean, &data.noisy, detections, &lookup, &|_, _| policy.lambda)?;
    let corpus = apply_plan(&data.clean, &data.noisy, &plan)?;
    Ok((corpus, plan))
}

/// Stage 4: primary training and evaluation on the test split.
pub fn train_and_evaluate(
    config: &PipelineConfig,
    data: &TrialData,
    training_set: &LabeledCorpus,
) -> Result<(Classifier, TrialResult)> {
    let cfg = config.primary_train_config(data.trial);
    let mut primary = Classifier::new(data.architecture.clone(), cfg.seed)?;
    train(&mut primary, training_set, &cfg)?;
    let result = evaluate(&primary, &data.test, cfg.seed)?;
    Ok((primary, result))
}

pub fn evaluate(classifier: &Classifier, test: &LabeledCorpus, seed: u64) -> Result<TrialResult> {
    let predictions = test
        .instances()
        .par_iter()
        .map(|inst| classifier.predict_clip(inst.blocks()?))
        .collect::<Result<Vec<_>>>()?;
    let truths: Vec<usize> = test.instances().iter().map(|i| i.label.argmax()).collect();
    Ok(TrialResult {
        accuracy: accuracy(&predictions, &truths)?,
        average_precision: micro_average_precision(&predictions, &truths)?,
        seed,
    })
}

/// Ids seen by each stage, written as `stages.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub system: System,
    pub trial: usize,
    pub seed: u64,
    pub aux_train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub noisy_ids: Vec<String>,
    pub primary_train_ids: Vec<String>,
    pub thresholds: Option<Thresholds>,
    pub result: TrialResult,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub result: TrialResult,
    pub primary: Classifier,
    pub auxiliary: Option<Classifier>,
    pub detection: Option<DetectionStage>,
    pub plan: Vec<RelabelEntry>,
    pub stages: StageLog,
}

fn ids(corpus: &LabeledCorpus) -> Vec<String> {
    corpus.ids().into_iter().map(String::from).collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub const DETECTION_REPORT: &str = "detection_report.csv";
pub const AUX_PREDICTIONS: &str = "aux_predictions.csv";
pub const RELABEL_MANIFEST: &str = "relabel_manifest.csv";
pub const AUX_CHECKPOINT: &str = "aux_checkpoint.json";
pub const PRIMARY_CHECKPOINT: &str = "primary_checkpoint.json";
pub const STAGES: &str = "stages.json";

/// Runs one trial on already loaded data, writing artifacts when the
/// config has an output directory.
pub fn run_trial_on(config: &PipelineConfig, trial: usize, data: LoadedData) -> Result<TrialOutcome> {
    let data = prepare_trial(config, trial, data)?;
    let dir = config.trial_dir(trial);
    if let Some(dir) = &dir {
        create_dir(dir)?;
    }

    let (auxiliary, detection, predictions) = if config.system.uses_aux() {
        let aux = train_auxiliary(config, &data)?;
        let detection = if config.system.uses_detection() {
            Some(run_detection(config, &aux, &data)?)
        } else {
            None
        };
        let predictions = auxiliary_predictions(&aux, &data.noisy)?;
        (Some(aux), detection, predictions)
    } else {
        (None, None, Vec::new())
    };

    let thresholds = detection.as_ref().map(|d| d.thresholds.clone()).unwrap_or(Thresholds {
        theta: config.theta,
        tau: config.tau,
        validation_detected: None,
    });
    let outcomes = detection.as_ref().map(|d| d.outcomes.as_slice()).unwrap_or(&[]);
    let (training_set, plan) = relabel_stage(config, &data, outcomes, &predictions, &thresholds)?;
    let (primary, result) = train_and_evaluate(config, &data, &training_set)?;

    let stages = StageLog {
        system: config.system,
        trial,
        seed: data.seed,
        aux_train_ids: if auxiliary.is_some() { ids(&data.clean) } else { Vec::new() },
        validation_ids: data.validation.as_ref().map(ids).unwrap_or_default(),
        noisy_ids: ids(&data.noisy),
        primary_train_ids: ids(&training_set),
        thresholds: detection.as_ref().map(|d| d.thresholds.clone()),
        result,
    };

    if let Some(dir) = &dir {
        if let Some(d) = &detection {
            write_detection_report(&dir.join(DETECTION_REPORT), &d.outcomes)?;
        }
        if let Some(aux) = &auxiliary {
            write_predictions(&dir.join(AUX_PREDICTIONS), &predictions)?;
            Checkpoint::new(aux, None).save(&dir.join(AUX_CHECKPOINT))?;
        }
        if config.system.uses_aux() {
            write_relabel_manifest(&dir.join(RELABEL_MANIFEST), &plan)?;
        }
        Checkpoint::new(&primary, None).save(&dir.join(PRIMARY_CHECKPOINT))?;
        write_json(&dir.join(STAGES), &stages)?;
    }

    Ok(TrialOutcome {
        result,
        primary,
        auxiliary,
        detection,
        plan,
        stages,
    })
}

pub fn run_trial(config: &PipelineConfig, trial: usize) -> Result<TrialOutcome> {
    config.validate()?;
    run_trial_on(config, trial, load_data(&config.data, trial)?)
}

/// Replays stages 3 and 4 of a finished trial from its detection report and
/// auxiliary predictions, without retraining the auxiliary classifier.
pub fn replay_trial(config: &PipelineConfig, trial: usize, trial_dir: &Path) -> Result<TrialOutcome> {
    config.validate()?;
    let data = prepare_trial(config, trial, load_data(&config.data, trial)?)?;
    let stages: StageLog = {
        let path = trial_dir.join(STAGES);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)?
    };
    let detections = if config.system.uses_detection() {
        read_detection_report(&trial_dir.join(DETECTION_REPORT))?
    } else {
        Vec::new()
    };
    let predictions = if config.system.uses_aux() {
        read_predictions(&trial_dir.join(AUX_PREDICTIONS))?
    } else {
        Vec::new()
    };
    let thresholds = stages.thresholds.clone().unwrap_or(Thresholds {
        theta: config.theta,
        tau: config.tau,
        validation_detected: None,
    });
    let (training_set, plan) = relabel_stage(config, &data, &detections, &predictions, &thresholds)?;
    let (primary, result) = train_and_evaluate(config, &data, &training_set)?;
    Ok(TrialOutcome {
        result,
        primary,
        auxiliary: None,
        detection: None,
        plan,
        stages: StageLog {
            primary_train_ids: ids(&training_set),
            result,
            ..stages
        },
    })
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub summary: SystemSummary,
    pub trials: Vec<TrialOutcome>,
}

fn preload(source: &DataSource) -> Result<Option<LoadedData>> {
    match source {
        DataSource::Manifest { .. } => Ok(Some(load_data(source, 0)?)),
        DataSource::Synthetic { .. } => Ok(None),
    }
}

fn run_with(config: &PipelineConfig, preloaded: Option<&LoadedData>) -> Result<PipelineRun> {
    config.validate()?;
    let trials = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            let data = match preloaded {
                Some(d) => d.clone(),
                None => load_data(&config.data, t)?,
            };
            run_trial_on(config, t, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<TrialResult> = trials.iter().map(|t| t.result).collect();
    let summary = SystemSummary {
        system: config.system.name().to_string(),
        aggregate: aggregate_trials(&results)?,
        trials: results,
    };
    if let Some(out) = &config.output_dir {
        let dir = out.join(config.system.name());
        create_dir(&dir)?;
        std::fs::write(dir.join("report.csv"), report_csv(std::slice::from_ref(&summary)))
            .map_err(|e| Error::io(&dir, e))?;
    }
    Ok(PipelineRun { summary, trials })
}

/// All trials of one configuration, run concurrently, plus their aggregate.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    let preloaded = preload(&config.data)?;
    run_with(config, preloaded.as_ref())
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub rows: Vec<SystemSummary>,
}

impl SuiteReport {
    pub fn csv(&self) -> String {
        report_csv(&self.rows)
    }

    pub fn table(&self) -> String {
        report_table(&self.rows)
    }
}

pub const SUITE_CSV: &str = "report.csv";
pub const SUITE_TABLE: &str = "report.txt";

/// Runs every configuration on the same data and seeds. Reports go to the
/// first configuration's output directory, if any.
pub fn run_experiment_suite(configs: &[PipelineConfig]) -> Result<SuiteReport> {
    let first = configs
        .first()
        .ok_or_else(|| Error::param("suite", "no configurations"))?;
    for c in configs {
        c.validate()?;
        if c.data != first.data || c.seed != first.seed || c.trials != first.trials {
            return Err(Error::param(
                "suite",
                format!(
                    "configuration for {} does not share the data source, seed and trial count of {}",
                    c.system, first.system
                ),
            ));
        }
    }
    let preloaded = preload(&first.data)?;
    let rows = configs
        .iter()
        .map(|c| run_with(c, preloaded.as_ref()).map(|run| run.summary))
        .collect::<Result<Vec<_>>>()?;
    let report = SuiteReport { rows };
    if let Some(out) = &first.output_dir {
        create_dir(out)?;
        std::fs::write(out.join(SUITE_CSV), report.csv()).map_err(|e| Error::io(out, e))?;
        std::fs::write(out.join(SUITE_TABLE), report.table()).map_err(|e| Error::io(out, e))?;
    }
    Ok(report)
}
