use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roadsense::dataset::Split;
use roadsense::pipeline::{self, PipelineConfig, PipelineError, TrainRequest};
use roadsense::weather::{route, Modality, WeatherCondition, WeatherReading};

/// Weather-conditional road surface classification.
#[derive(Parser)]
#[command(name = "roadsense", version)]
struct Cli {
    /// Pipeline config (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the weather rule base as JSON.
    ExportRules {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Classify one weather reading and show the route.
    ClassifyWeather {
        #[arg(long)]
        wind: f64,
        #[arg(long)]
        humidity: f64,
        #[arg(long)]
        light: f64,
        #[arg(long)]
        temperature: f64,
        #[arg(long)]
        rain: f64,
        /// Print the decision as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Generate a synthetic dataset and its manifest.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        /// camera, acceleration or all.
        #[arg(long, default_value = "all")]
        modality: String,
        #[arg(long, default_value_t = 200)]
        per_class: usize,
        #[arg(long)]
        image_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Stratified train/val/test split of a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated train,val,test ratios.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Convert a manifest's data to model-ready images.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        image_size: Option<usize>,
        #[arg(long)]
        window_len: Option<usize>,
        #[arg(long)]
        hop: Option<usize>,
        #[arg(long)]
        fft_size: Option<usize>,
        #[arg(long)]
        frame_hop: Option<usize>,
    },
    /// Train the model(s) for a modality and weather condition(s).
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        modality: Modality,
        /// Weather condition, repeatable; every condition routed to the
        /// modality when omitted.
        #[arg(long)]
        condition: Vec<WeatherCondition>,
        #[arg(long)]
        preset: Option<String>,
        /// Fine-tune from this model.
        #[arg(long)]
        init: Option<PathBuf>,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        image_size: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Confusion matrix and classification report of a model on a split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "test")]
        split: Split,
        /// Defaults to the model file's key prefix.
        #[arg(long)]
        modality: Option<Modality>,
        /// Write the JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a drive log through weather routing and road classification.
    Simulate {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        /// Decision CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-window fuzzy activation trace CSV.
        #[arg(long)]
        activations: Option<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
    },
}

#[derive(Args)]
struct RulesArg {
    /// Rule base JSON instead of the built-in one.
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    train_seed: Option<u64>,
    /// Feed raw pixels instead of standardized inputs.
    #[arg(long)]
    no_standardize: bool,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), PipelineError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| {
                    PipelineError::new(pipeline::ErrorKind::Data, "E_IO", format!("{}: {e}", dir.display()))
                })?;
            }
            std::fs::write(p, text)
                .map_err(|e| PipelineError::new(pipeline::ErrorKind::Data, "E_IO", format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::ExportRules { out, rules } => {
            let classifier = pipeline::load_classifier(rules.rules.as_deref().or(cfg.rules.as_deref()))?;
            pipeline::export_rules(&classifier, &out)?;
            println!("wrote {} rules to {}", classifier.system().rules().len(), out.display());
        }
        Command::ClassifyWeather { wind, humidity, light, temperature, rain, json, rules } => {
            let classifier = pipeline::load_classifier(rules.rules.as_deref().or(cfg.rules.as_deref()))?;
            let decision = pipeline::classify_weather(
                &classifier,
                &WeatherReading::new(wind, humidity, light, temperature, rain),
            )?;
            if json {
                println!("{}", serde_json::to_string_pretty(&decision).expect("decision serializes"));
            } else {
                print!("{}", pipeline::format_decision(&decision));
            }
        }
        Command::Synth { out, modality, per_class, image_size, seed } => {
            set(&mut cfg.image_size, image_size);
            set(&mut cfg.seed, seed);
            cfg.validate()?;
            let modalities = match modality.as_str() {
                "all" => Modality::ALL.to_vec(),
                other => vec![other
                    .parse()
                    .map_err(|e: String| PipelineError::new(pipeline::ErrorKind::Config, "E_USAGE", e))?],
            };
            let root = out.unwrap_or_else(|| cfg.data_root.clone());
            let manifest = pipeline::synth(&cfg, &root, &modalities, per_class)?;
            println!("wrote {} entries to {}", manifest.entries.len(), root.join("manifest.json").display());
        }
        Command::Split { manifest, out, ratios, seed } => {
            if let Some(r) = ratios {
                cfg.ratios = r.try_into().map_err(|r: Vec<f64>| {
                    PipelineError::new(
                        pipeline::ErrorKind::Config,
                        "E_USAGE",
                        format!("--ratios takes train,val,test; got {} values", r.len()),
                    )
                })?;
            }
            set(&mut cfg.seed, seed);
            cfg.validate()?;
            let m = pipeline::split(&manifest, &out, cfg.ratios, cfg.seed)?;
            for (split, counts) in &m.class_counts {
                println!("{split}: {}", counts.values().sum::<usize>());
            }
        }
        Command::Preprocess { manifest, out, image_size, window_len, hop, fft_size, frame_hop } => {
            set(&mut cfg.image_size, image_size);
            set(&mut cfg.signal.window_len, window_len);
            set(&mut cfg.signal.hop, hop);
            set(&mut cfg.signal.fft_size, fft_size);
            set(&mut cfg.signal.frame_hop, frame_hop);
            cfg.validate()?;
            let m = pipeline::preprocess(&cfg, &manifest, &out)?;
            println!("wrote {} images to {}", m.entries.len(), out.display());
        }
        Command::Train { manifest, modality, condition, preset, init, store, image_size, train } => {
            set(&mut cfg.model_store, store);
            set(&mut cfg.image_size, image_size);
            if preset.is_some() {
                cfg.preset = preset;
            }
            let t = &mut cfg.train;
            set(&mut t.learning_rate, train.learning_rate);
            set(&mut t.batch_size, train.batch_size);
            set(&mut t.max_epochs, train.max_epochs);
            set(&mut t.patience, train.patience);
            set(&mut t.seed, train.train_seed);
            if train.no_standardize {
                t.standardize = false;
            }
            cfg.validate()?;
            let conditions = if condition.is_empty() {
                WeatherCondition::ALL.into_iter().filter(|&c| route(c).modality == modality).collect()
            } else {
                condition
            };
            let req = TrainRequest { manifest: &manifest, modality, conditions: &conditions, init: init.as_deref() };
            for r in pipeline::train(&cfg, &req)? {
                println!(
                    "{}: {} epochs (best {} val loss {:.4}{}), patience {}",
                    r.model_key,
                    r.epochs_run,
                    r.best_epoch,
                    r.best_val_loss,
                    if r.stopped_early { ", stopped early" } else { "" },
                    r.patience
                );
            }
        }
        Command::Evaluate { model, manifest, split, modality, out } => {
            let modality = match modality {
                Some(m) => m,
                None => model
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .and_then(|s| s.split('-').next())
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| {
                        PipelineError::new(
                            pipeline::ErrorKind::Config,
                            "E_USAGE",
                            "cannot infer modality from the model name; pass --modality",
                        )
                    })?,
            };
            let eval = pipeline::evaluate(&model, &manifest, modality, split)?;
            if let Some(path) = &out {
                write_or_print(Some(path), &eval.to_json())?;
            }
            print!("{}", eval.to_text());
        }
        Command::Simulate { log, store, out, activations, rules } => {
            set(&mut cfg.model_store, store);
            let classifier = pipeline::load_classifier(rules.rules.as_deref().or(cfg.rules.as_deref()))?;
            let sim = pipeline::simulate(&cfg, &classifier, &log)?;
            if let Some(path) = &activations {
                write_or_print(Some(path), &sim.activations)?;
            }
            write_or_print(out.as_deref(), &sim.decisions)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", PipelineError::new(pipeline::ErrorKind::Config, "E_USAGE", first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
