//! The command layer: rule export, weather classification, synthesis,
//! splitting, preprocessing, training, evaluation and drive replay.
//!
//! Every failure is a [`PipelineError`] carrying a stable code and an exit
//! status (2 config, 3 data, 4 model).

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{self, DatasetError, DatasetManifest, ManifestEntry, Split, SynthParams};
use crate::fuzzy::{FuzzyError, FuzzySystem};
use crate::image::{ImageError, ImageTensor};
use crate::metrics::{self, ClassificationReport, ConfusionMatrix};
use crate::neural::{self, serialize, Example, ModelSpec, NeuralError, TrainConfig, TrainedModel};
use crate::road::RoadClass;
use crate::signal::{self, AccelLog, AccelWindow, SignalConfig, SignalError};
use crate::weather::{route, Modality, RoutingDecision, WeatherClassifier, WeatherCondition, WeatherReading};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Model,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Config => 2,
            Self::Data => 3,
            Self::Model => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineError {
    pub kind: ErrorKind,
    pub code: &'static str,
    pub message: String,
}

impl PipelineError {
    pub fn new(kind: ErrorKind, code: &'static str, message: impl Into<String>) -> Self {
        let message: String = message.into();
        Self { kind, code, message: message.split_whitespace().collect::<Vec<_>>().join(" ") }
    }

    fn config(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, code, message)
    }

    fn data(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Data, code, message)
    }

    fn model(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Model, code, message)
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.code, self.message)
    }
}

impl std::error::Error for PipelineError {}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path, e: impl fmt::Display) -> PipelineError {
    PipelineError::data("E_IO", format!("{}: {e}", path.display()))
}

fn dataset_err(path: &Path, e: DatasetError) -> PipelineError {
    match e {
        DatasetError::BadParams(_) | DatasetError::BadRatios(_) => PipelineError::config("E_CONFIG", e.to_string()),
        DatasetError::Io(e) => io_err(path, e),
        other => PipelineError::data("E_MANIFEST", format!("{}: {other}", path.display())),
    }
}

fn image_err(path: &Path, e: ImageError) -> PipelineError {
    PipelineError::data("E_IMAGE", format!("{}: {e}", path.display()))
}

fn neural_err(e: NeuralError) -> PipelineError {
    match e {
        NeuralError::MissingClass(c) => PipelineError::data(
            "E_DATA",
            format!("class {} has no training examples", RoadClass::from_index(c).map_or("?", |c| c.as_str())),
        ),
        NeuralError::EmptySet(m) => PipelineError::data("E_DATA", m),
        NeuralError::Diverged { .. } => PipelineError::model("E_TRAIN", e.to_string()),
        other => PipelineError::model("E_MODEL", other.to_string()),
    }
}

fn rules_err(path: &Path, e: FuzzyError) -> PipelineError {
    PipelineError::config("E_RULES", format!("{}: {e}", path.display()))
}

/// Settings shared by all commands. Relative paths in a config file are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub data_root: PathBuf,
    pub model_store: PathBuf,
    /// Rule base JSON; the built-in 32-rule weather system when absent.
    pub rules: Option<PathBuf>,
    /// Seeds synthesis and splitting.
    pub seed: u64,
    pub image_size: usize,
    pub ratios: [f64; 3],
    /// Architecture preset; per-modality default when absent.
    pub preset: Option<String>,
    pub signal: SignalConfig,
    pub train: TrainConfig,
    pub synth: SynthParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            data_root: PathBuf::from("data"),
            model_store: PathBuf::from("models"),
            rules: None,
            seed: 7,
            image_size: 64,
            ratios: [0.70, 0.15, 0.15],
            preset: None,
            signal: SignalConfig::default(),
            train: TrainConfig::default(),
            synth: SynthParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| PipelineError::config("E_CONFIG", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::config("E_CONFIG", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)
            .map_err(|e| PipelineError::config("E_CONFIG", format!("{}: {}", path.display(), e.message)))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data_root, &mut cfg.model_store].into_iter().chain(cfg.rules.as_mut()) {
            if p.is_relative() {
                *p = normalize(&base.join(&*p));
            }
        }
        if let Some(rules) = &cfg.rules {
            if !rules.is_file() {
                return Err(PipelineError::config("E_CONFIG", format!("rule base {} does not exist", rules.display())));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PipelineError::config("E_CONFIG", m));
        if self.image_size < 8 {
            return bad(format!("image_size must be at least 8, got {}", self.image_size));
        }
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0))
            || (self.ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("ratios {:?} must be non-negative and sum to 1", self.ratios));
        }
        self.synth.validate().map_err(|e| PipelineError::config("E_CONFIG", e.to_string()))?;
        let s = &self.signal;
        if s.window_len == 0
            || s.hop == 0
            || s.frame_hop == 0
            || !s.fft_size.is_power_of_two()
            || s.fft_size > s.window_len
        {
            return bad(
                "signal: window_len, hop and frame_hop must be positive; fft_size a power of two <= window_len".into(),
            );
        }
        if !(s.sample_rate.is_finite() && s.sample_rate > 0.0) {
            return bad("signal: sample_rate must be positive".into());
        }
        Ok(())
    }

    pub fn preset_for(&self, modality: Modality) -> String {
        self.preset.clone().unwrap_or_else(|| default_preset(modality).to_string())
    }
}

/// mini-vgg for camera textures, mini-alexnet for acceleration spectrograms.
pub fn default_preset(modality: Modality) -> &'static str {
    match modality {
        Modality::Camera => "mini-vgg",
        Modality::Acceleration => "mini-alexnet",
    }
}

/// Lexically removes `.` and `a/..` pairs.
fn normalize(path: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in path.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir if matches!(out.components().next_back(), Some(Component::Normal(_))) => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

fn dir_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------- weather

pub fn load_classifier(rules: Option<&Path>) -> Result<WeatherClassifier> {
    match rules {
        None => Ok(WeatherClassifier::default()),
        Some(path) => {
            let system = FuzzySystem::load(path).map_err(|e| rules_err(path, e))?;
            WeatherClassifier::new(system).map_err(|e| rules_err(path, e))
        }
    }
}

pub fn export_rules(classifier: &WeatherClassifier, out: &Path) -> Result<()> {
    write_file(out, classifier.system().to_json())
}

pub fn classify_weather(classifier: &WeatherClassifier, reading: &WeatherReading) -> Result<RoutingDecision> {
    classifier.decide(reading).map_err(|e| PipelineError::data("E_DATA", e.to_string()))
}

/// Condition, route and activation table as printed by `classify-weather`.
pub fn format_decision(decision: &RoutingDecision) -> String {
    let mut out = format!(
        "condition: {}\nmodality: {}\nmodel_key: {}\n\n{:<10} {:>10}\n",
        decision.condition, decision.modality, decision.model_key, "label", "activation"
    );
    for (label, a) in &decision.activations {
        out.push_str(&format!("{:<10} {:>10.4}\n", label.as_str(), a));
    }
    out
}

// ---------------------------------------------------------------- dataset

/// Generates `per_class` items per class for each modality under `root` and
/// writes `root/manifest.json`.
pub fn synth(cfg: &PipelineConfig, root: &Path, modalities: &[Modality], per_class: usize) -> Result<DatasetManifest> {
    if per_class == 0 {
        return Err(PipelineError::config("E_CONFIG", "per-class count must be positive"));
    }
    let params = SynthParams { seed: cfg.seed, ..cfg.synth.clone() };
    let duration = cfg.signal.window_len as f64 / params.sample_rate;
    let mut entries = Vec::new();
    for &m in modalities {
        let part = dataset::synthesize(root, m, per_class, cfg.image_size, duration, &params)
            .map_err(|e| dataset_err(root, e))?;
        entries.extend(part.entries);
    }
    let manifest = DatasetManifest::new(params, entries);
    save_manifest(&manifest, &root.join("manifest.json"))?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    if !path.is_file() {
        return Err(PipelineError::data("E_MANIFEST", format!("manifest {} not found", path.display())));
    }
    DatasetManifest::load(path).map_err(|e| dataset_err(path, e))
}

fn save_manifest(manifest: &DatasetManifest, path: &Path) -> Result<()> {
    let text = manifest.to_json().map_err(|e| dataset_err(path, e))?;
    write_file(path, text)
}

/// Re-expresses entry paths relative to a manifest written into `to`.
fn rebase(entries: &mut [ManifestEntry], from: &Path, to: &Path) {
    if normalize(from) == normalize(to) {
        return;
    }
    let absolute = |p: &Path| normalize(&std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf()));
    let base = absolute(to);
    for e in entries {
        let full = absolute(&from.join(&e.path));
        e.path = relative_to(&full, &base).to_string_lossy().into_owned();
    }
}

/// `path` expressed relative to `base`, climbing with `..` as needed. Both
/// must be absolute and normalized; across filesystem roots `path` is kept.
fn relative_to(path: &Path, base: &Path) -> PathBuf {
    let (p, b): (Vec<_>, Vec<_>) = (path.components().collect(), base.components().collect());
    let common = p.iter().zip(&b).take_while(|(x, y)| x == y).count();
    if common == 0 {
        return path.to_path_buf();
    }
    let mut out: PathBuf = b[common..].iter().map(|_| Component::ParentDir).collect();
    out.extend(&p[common..]);
    out
}

/// Stratified split of `input` into `out`.
pub fn split(input: &Path, out: &Path, ratios: [f64; 3], seed: u64) -> Result<DatasetManifest> {
    let mut manifest = load_manifest(input)?;
    manifest.entries = dataset::stratified_split(&manifest.entries, ratios, seed).map_err(|e| dataset_err(input, e))?;
    manifest.ratios = Some(ratios);
    manifest.split_seed = Some(seed);
    rebase(&mut manifest.entries, &dir_of(input), &dir_of(out));
    manifest.recount();
    save_manifest(&manifest, out)?;
    Ok(manifest)
}

/// Turns every entry into a model-ready grayscale/colour image under
/// `out_root`: acceleration streams are windowed and converted to
/// spectrogram images (one entry per window, same split and class), camera
/// images are resized. Writes `out_root/manifest.json`.
pub fn preprocess(cfg: &PipelineConfig, input: &Path, out_root: &Path) -> Result<DatasetManifest> {
    let manifest = load_manifest(input)?;
    let in_dir = dir_of(input);
    let sc = SignalConfig { image_size: cfg.image_size, ..cfg.signal };
    let mut entries = Vec::new();
    for e in &manifest.entries {
        let src = in_dir.join(&e.path);
        let stem = Path::new(&e.path).file_stem().map_or_else(|| "item".into(), |s| s.to_string_lossy().into_owned());
        let dir = format!("{}/{}", e.modality, e.road_class);
        match e.modality {
            Modality::Camera => {
                let img = ImageTensor::read_pnm(&src).map_err(|err| image_err(&src, err))?;
                let img = img.resize(cfg.image_size, cfg.image_size).map_err(|err| image_err(&src, err))?;
                let path = format!("{dir}/{stem}.pgm");
                let path = if img.channels() == 3 { path.replace(".pgm", ".ppm") } else { path };
                write_image(&img, &out_root.join(&path))?;
                entries.push(ManifestEntry { path, ..e.clone() });
            }
            Modality::Acceleration => {
                for (k, window) in accel_windows(&src, &sc)?.iter().enumerate() {
                    let img = sc.window_image(window).map_err(|err| signal_err(&src, err))?;
                    let path = format!("{dir}/{stem}_w{k:03}.pgm");
                    write_image(&img, &out_root.join(&path))?;
                    entries.push(ManifestEntry { path, ..e.clone() });
                }
            }
        }
    }
    let mut out = DatasetManifest { entries, ..manifest };
    out.recount();
    save_manifest(&out, &out_root.join("manifest.json"))?;
    Ok(out)
}

fn signal_err(path: &Path, e: SignalError) -> PipelineError {
    match e {
        SignalError::Io(e) => io_err(path, e),
        other => PipelineError::data("E_DATA", format!("{}: {other}", path.display())),
    }
}

fn accel_windows(path: &Path, sc: &SignalConfig) -> Result<Vec<AccelWindow>> {
    let log = AccelLog::read(path).map_err(|e| signal_err(path, e))?;
    let label = log.labels.as_ref().and_then(|l| l.first().copied());
    let mut windows =
        signal::segment(&log.accel_z, sc.sample_rate, sc.window_len, sc.hop).map_err(|e| signal_err(path, e))?;
    windows.iter_mut().for_each(|w| w.label = label);
    Ok(windows)
}

fn write_image(img: &ImageTensor, path: &Path) -> Result<()> {
    write_file(path, img.to_pnm_bytes().map_err(|e| image_err(path, e))?)
}

/// Reads an image and fits it to the model input (resize, channel count).
pub fn load_input(spec: &ModelSpec, path: &Path) -> Result<ImageTensor> {
    let img = ImageTensor::read_pnm(path).map_err(|e| image_err(path, e))?;
    fit_input(spec, img).map_err(|e| image_err(path, e))
}

fn fit_input(spec: &ModelSpec, img: ImageTensor) -> std::result::Result<ImageTensor, ImageError> {
    let (h, w, c) = spec.input_shape;
    let img = if img.channels() == c { img } else { img.with_channels(c)? };
    if img.height() == h && img.width() == w {
        Ok(img)
    } else {
        img.resize(h, w)
    }
}

fn image_entries(manifest: &DatasetManifest, modality: Modality, split: Split) -> Vec<&ManifestEntry> {
    manifest.select(modality, Some(split)).collect()
}

fn load_examples(spec: &ModelSpec, dir: &Path, entries: &[&ManifestEntry]) -> Result<Vec<Example>> {
    entries
        .iter()
        .map(|e| {
            if !(e.path.ends_with(".pgm") || e.path.ends_with(".ppm")) {
                return Err(PipelineError::data(
                    "E_DATA",
                    format!("{} is not an image; run `preprocess` on this manifest first", e.path),
                ));
            }
            let img = load_input(spec, &dir.join(&e.path))?;
            Ok(Example::from_image(&img, e.road_class.index()))
        })
        .collect()
}

// ---------------------------------------------------------------- models

pub fn model_path(store: &Path, key: &str) -> PathBuf {
    store.join(format!("{key}.rsm"))
}

/// Advisory lock on a model store, released on drop.
#[derive(Debug)]
pub struct StoreLock {
    path: PathBuf,
    _file: File,
}

impl StoreLock {
    pub fn acquire(store: &Path) -> Result<Self> {
        std::fs::create_dir_all(store).map_err(|e| io_err(store, e))?;
        let path = store.join(".lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(file) => Ok(Self { path, _file: file }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(PipelineError::model(
                "E_LOCKED",
                format!(
                    "model store {} is locked; remove {} if no other run is active",
                    store.display(),
                    path.display()
                ),
            )),
            Err(e) => Err(io_err(&path, e)),
        }
    }
}

impl Drop for StoreLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Training report written next to each model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub model_key: String,
    pub modality: Modality,
    pub condition: WeatherCondition,
    pub preset: String,
    /// Key of the model fine-tuning started from.
    pub init_model: Option<String>,
    pub train_size: usize,
    pub val_size: usize,
    pub config: TrainConfig,
    pub epochs_run: usize,
    pub stopping_epoch: usize,
    pub stopped_early: bool,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub patience: usize,
    pub history: Vec<neural::EpochRecord>,
}

impl TrainingReport {
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.history {
            out.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_loss));
        }
        out
    }
}

pub struct TrainRequest<'a> {
    pub manifest: &'a Path,
    pub modality: Modality,
    pub conditions: &'a [WeatherCondition],
    /// Fine-tune from this model instead of a fresh initialization.
    pub init: Option<&'a Path>,
}

/// Trains one model per condition on the manifest's train split (early
/// stopping on val) and stores `<store>/<modality>-<condition>.rsm` with a
/// `.report.json` and `.loss.csv` beside it.
pub fn train(cfg: &PipelineConfig, req: &TrainRequest) -> Result<Vec<TrainingReport>> {
    if req.conditions.is_empty() {
        return Err(PipelineError::config("E_CONFIG", "no weather condition to train for"));
    }
    for &c in req.conditions {
        let routed = route(c).modality;
        if routed != req.modality {
            return Err(PipelineError::config(
                "E_ROUTE",
                format!("condition {c} routes to {routed}, not {}", req.modality),
            ));
        }
    }
    let manifest = load_manifest(req.manifest)?;
    let dir = dir_of(req.manifest);
    let train_entries = image_entries(&manifest, req.modality, Split::Train);
    let val_entries = image_entries(&manifest, req.modality, Split::Val);
    if train_entries.is_empty() || val_entries.is_empty() {
        return Err(PipelineError::data(
            "E_DATA",
            format!("{} needs {} entries in both train and val splits", req.manifest.display(), req.modality),
        ));
    }
    let init = req.init.map(load_model).transpose()?;
    let preset = cfg.preset_for(req.modality);
    let spec = match &init {
        Some(m) => m.spec().clone(),
        None => {
            let first = ImageTensor::read_pnm(dir.join(&train_entries[0].path))
                .map_err(|e| image_err(&dir.join(&train_entries[0].path), e))?;
            ModelSpec::preset(&preset, cfg.image_size, cfg.image_size, first.channels(), RoadClass::COUNT)
                .map_err(|e| PipelineError::config("E_CONFIG", e.to_string()))?
        }
    };
    let train_set = load_examples(&spec, &dir, &train_entries)?;
    let val_set = load_examples(&spec, &dir, &val_entries)?;

    let _lock = StoreLock::acquire(&cfg.model_store)?;
    // Per-condition runs see the same data, config and starting point, so
    // they are one deterministic run stored under each key.
    let model =
        neural::train_with(&spec, &train_set, &cfg.train, init.as_ref(), |m, _| neural::evaluate_loss(m, &val_set))
            .map_err(neural_err)?;
    let meta = &model.meta;
    let mut reports = Vec::new();
    for &condition in req.conditions {
        let decision = route(condition);
        let report = TrainingReport {
            model_key: decision.model_key.clone(),
            modality: req.modality,
            condition,
            preset: if init.is_some() { "init".into() } else { preset.clone() },
            init_model: req.init.and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned()),
            train_size: train_set.len(),
            val_size: val_set.len(),
            config: cfg.train,
            epochs_run: meta.epochs_run,
            stopping_epoch: meta.epochs_run,
            stopped_early: meta.stopped_early,
            best_epoch: meta.best_epoch,
            best_val_loss: meta.best_val_loss,
            patience: meta.patience,
            history: meta.history.clone(),
        };
        let store = &cfg.model_store;
        write_file(&model_path(store, &decision.model_key), serialize::to_bytes(&model))?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_file(&store.join(format!("{}.report.json", decision.model_key)), json)?;
        write_file(&store.join(format!("{}.loss.csv", decision.model_key)), report.loss_csv())?;
        reports.push(report);
    }
    Ok(reports)
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    if !path.is_file() {
        return Err(PipelineError::model("E_MODEL_MISSING", format!("model {} not found", path.display())));
    }
    serialize::load(path).map_err(|e| PipelineError::model("E_MODEL", format!("{}: {e}", path.display())))
}

/// Confusion matrix and report plus what they were computed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub model: String,
    pub modality: Modality,
    pub split: Split,
    pub confusion_matrix: ConfusionMatrix,
    pub report: ClassificationReport,
}

pub fn evaluate(model_file: &Path, manifest_path: &Path, modality: Modality, split: Split) -> Result<Evaluation> {
    let model = load_model(model_file)?;
    let manifest = load_manifest(manifest_path)?;
    let entries = image_entries(&manifest, modality, split);
    if entries.is_empty() {
        return Err(PipelineError::data("E_DATA", format!("no {modality} entries in the {split} split")));
    }
    let set = load_examples(model.spec(), &dir_of(manifest_path), &entries)?;
    let mut truth = Vec::with_capacity(set.len());
    let mut predicted = Vec::with_capacity(set.len());
    for e in &set {
        let probs = model.forward_planar(&e.input).map_err(neural_err)?;
        truth.push(e.label);
        predicted.push(neural::argmax(&probs));
    }
    let labels: Vec<String> = RoadClass::ALL.iter().map(|c| c.as_str().to_string()).collect();
    let cm =
        metrics::confusion(&truth, &predicted, &labels).map_err(|e| PipelineError::model("E_MODEL", e.to_string()))?;
    let report = metrics::report(&cm).map_err(|e| PipelineError::data("E_DATA", e.to_string()))?;
    let name = model_file.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    Ok(Evaluation { model: name, modality, split, confusion_matrix: cm, report })
}

impl Evaluation {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("evaluation serializes") + "\n"
    }

    /// Confusion matrix followed by the classification table.
    pub fn to_text(&self) -> String {
        let cm = &self.confusion_matrix;
        let names: Vec<String> = cm.class_labels.iter().enumerate().map(|(i, l)| format!("{l} {i}")).collect();
        let width = names.iter().map(String::len).max().unwrap_or(0);
        let mut out = format!(
            "{} on {} ({})\n\nconfusion matrix (rows true, columns predicted)\n",
            self.model, self.split, self.modality
        );
        out.push_str(&format!("{:>width$}", ""));
        for i in 0..cm.num_classes() {
            out.push_str(&format!(" {i:>5}"));
        }
        out.push('\n');
        for (i, row) in cm.counts.iter().enumerate() {
            out.push_str(&format!("{:>width$}", names[i]));
            for v in row {
                out.push_str(&format!(" {v:>5}"));
            }
            out.push('\n');
        }
        out.push('\n');
        out.push_str(&self.report.to_table());
        if !self.report.undefined.is_empty() {
            out.push_str(&format!(
                "\nwarning: precision or recall undefined (reported as 0) for: {}\n",
                self.report.undefined.join(", ")
            ));
        }
        out
    }
}

// ---------------------------------------------------------------- replay

/// One row of a drive log.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveLogRecord {
    pub timestamp_s: f64,
    pub accel_z: f64,
    pub image_path: Option<String>,
    pub weather: WeatherReading,
}

pub const DRIVE_LOG_HEADER: [&str; 8] =
    ["timestamp_s", "accel_z", "image_path", "wind_speed", "humidity", "light_level", "temperature", "rain_sensor"];

pub const SIMULATION_HEADER: &str = "window_start,condition,modality,model_key,predicted_class,probability";

pub fn read_drive_log(path: &Path) -> Result<Vec<DriveLogRecord>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_drive_log(file).map_err(|e| PipelineError { message: format!("{}: {}", path.display(), e.message), ..e })
}

pub fn parse_drive_log<R: std::io::Read>(reader: R) -> Result<Vec<DriveLogRecord>> {
    let bad = |line: usize, m: String| PipelineError::data("E_LOG", format!("line {line}: {m}"));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    let names: Vec<&str> = headers.iter().map(str::trim).collect();
    if names.iter().all(|n| n.is_empty()) {
        return Ok(Vec::new());
    }
    if names != DRIVE_LOG_HEADER {
        return Err(bad(1, format!("expected header `{}`", DRIVE_LOG_HEADER.join(","))));
    }
    let mut out: Vec<DriveLogRecord> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| bad(line, e.to_string()))?;
        let num = |idx: usize| -> Result<f64> {
            let text = record.get(idx).unwrap_or("").trim();
            match text.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(bad(line, format!("bad {} `{text}`", DRIVE_LOG_HEADER[idx]))),
            }
        };
        let timestamp_s = num(0)?;
        if out.last().is_some_and(|prev| timestamp_s <= prev.timestamp_s) {
            return Err(bad(line, "timestamps must be strictly increasing".into()));
        }
        let image = record.get(2).unwrap_or("").trim();
        out.push(DriveLogRecord {
            timestamp_s,
            accel_z: num(1)?,
            image_path: (!image.is_empty()).then(|| image.to_string()),
            weather: WeatherReading::new(num(3)?, num(4)?, num(5)?, num(6)?, num(7)?),
        });
    }
    Ok(out)
}

/// Decision stream and per-window fuzzy activation trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub decisions: String,
    pub activations: String,
    pub rows: Vec<RoutingDecision>,
}

/// Replays a drive log window by window: averages the weather readings over
/// the window, classifies and routes, then predicts the road class with the
/// routed model from the acceleration window or the window's first camera
/// frame. Image paths are relative to the log's directory.
pub fn simulate(cfg: &PipelineConfig, classifier: &WeatherClassifier, log_path: &Path) -> Result<Simulation> {
    let records = read_drive_log(log_path)?;
    let log_dir = dir_of(log_path);
    let sc = SignalConfig { image_size: cfg.image_size, ..cfg.signal };
    let accel: Vec<f64> = records.iter().map(|r| r.accel_z).collect();
    let windows = match signal::segment(&accel, sc.sample_rate, sc.window_len, sc.hop) {
        Ok(w) => w,
        Err(SignalError::TooShort { .. }) => Vec::new(),
        Err(e) => return Err(PipelineError::config("E_CONFIG", e.to_string())),
    };

    let mut decisions = format!("{SIMULATION_HEADER}\n");
    let mut activations = String::from("window_start");
    for c in WeatherCondition::ALL {
        activations.push(',');
        activations.push_str(c.as_str());
    }
    activations.push('\n');
    let mut models: HashMap<String, TrainedModel> = HashMap::new();
    let mut rows = Vec::with_capacity(windows.len());
    for window in &windows {
        let span = &records[window.start_index..window.start_index + window.samples.len()];
        let mut mean = [0.0; 5];
        for r in span {
            for (m, v) in mean.iter_mut().zip(r.weather.as_array()) {
                *m += v / span.len() as f64;
            }
        }
        let reading = WeatherReading::new(mean[0], mean[1], mean[2], mean[3], mean[4]);
        let decision = classify_weather(classifier, &reading)?;
        if !models.contains_key(&decision.model_key) {
            let path = model_path(&cfg.model_store, &decision.model_key);
            if !path.is_file() {
                return Err(PipelineError::model(
                    "E_MODEL_MISSING",
                    format!("no model for {} in {}", decision.model_key, cfg.model_store.display()),
                ));
            }
            models.insert(decision.model_key.clone(), load_model(&path)?);
        }
        let model = &models[&decision.model_key];
        let image = match decision.modality {
            Modality::Acceleration => {
                let img = sc.window_image(window).map_err(|e| signal_err(log_path, e))?;
                fit_input(model.spec(), img).map_err(|e| image_err(log_path, e))?
            }
            Modality::Camera => {
                let frame = span.iter().find_map(|r| r.image_path.as_deref()).ok_or_else(|| {
                    PipelineError::data(
                        "E_LOG",
                        format!(
                            "{}: window at line {} routes to camera but has no image_path",
                            log_path.display(),
                            window.start_index + 2
                        ),
                    )
                })?;
                load_input(model.spec(), &log_dir.join(frame))?
            }
        };
        let (class, probs) = model.predict(&image).map_err(neural_err)?;
        let start = span[0].timestamp_s;
        decisions.push_str(&format!(
            "{start},{},{},{},{},{:.6}\n",
            decision.condition,
            decision.modality,
            decision.model_key,
            RoadClass::from_index(class).expect("five-class model").as_str(),
            probs[class]
        ));
        activations.push_str(&start.to_string());
        for c in WeatherCondition::ALL {
            activations.push_str(&format!(",{:.6}", decision.activations.get(&c).copied().unwrap_or(0.0)));
        }
        activations.push('\n');
        rows.push(decision);
    }
    Ok(Simulation { decisions, activations, rows })
}

/// Writes a synthetic drive log: `segments` of `(class, reading, seconds)`,
/// each with a synthetic acceleration stream and, every `frame_every`
/// samples, a synthetic camera frame under `dir/frames`.
pub fn synth_drive_log(
    cfg: &PipelineConfig,
    dir: &Path,
    segments: &[(RoadClass, WeatherReading, f64)],
    frame_every: usize,
) -> Result<PathBuf> {
    let params = SynthParams { seed: cfg.seed, ..cfg.synth.clone() };
    let fs = params.sample_rate;
    let mut out = DRIVE_LOG_HEADER.join(",") + "\n";
    let mut t0 = 0usize;
    for (k, &(class, reading, seconds)) in segments.iter().enumerate() {
        let seed = dataset::item_seed(params.seed, Modality::Acceleration, class, 1_000_000 + k as u64);
        let stream = dataset::synth_accel(class, seconds, &params, seed).map_err(|e| dataset_err(dir, e))?;
        for (i, a) in stream.iter().enumerate() {
            let n = t0 + i;
            let frame = if frame_every > 0 && n.is_multiple_of(frame_every) {
                let rel = format!("frames/{n:06}.pgm");
                let seed = dataset::item_seed(params.seed, Modality::Camera, class, 1_000_000 + n as u64);
                let img =
                    dataset::synth_image(class, cfg.image_size, &params, seed).map_err(|e| dataset_err(dir, e))?;
                write_image(&img, &dir.join(&rel))?;
                rel
            } else {
                String::new()
            };
            let w = reading.as_array();
            out.push_str(&format!("{},{a},{frame},{},{},{},{},{}\n", n as f64 / fs, w[0], w[1], w[2], w[3], w[4]));
        }
        t0 += stream.len();
    }
    let path = dir.join("drive_log.csv");
    write_file(&path, out)?;
    Ok(path)
}
