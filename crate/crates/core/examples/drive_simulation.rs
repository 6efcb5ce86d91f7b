//! The whole pipeline at toy scale: synthesize, split, preprocess, train a
//! model per modality, then replay a synthetic drive whose weather changes
//! from fog to daylight and watch the router switch sensors.
//!
//! `cargo run --release --example drive_simulation [work_dir]`

use std::path::PathBuf;

use roadsense::neural::TrainConfig;
use roadsense::pipeline::{self, PipelineConfig, TrainRequest};
use roadsense::weather::{route, Modality, WeatherClassifier, WeatherCondition, WeatherReading};
use roadsense::RoadClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("roadsense-drive"), PathBuf::from);
    let cfg = PipelineConfig {
        model_store: work.join("models"),
        image_size: 32,
        train: TrainConfig { learning_rate: 1e-3, max_epochs: 25, patience: 5, ..TrainConfig::default() },
        ..PipelineConfig::default()
    };

    pipeline::synth(&cfg, &work.join("raw"), &Modality::ALL, 60)?;
    pipeline::split(&work.join("raw/manifest.json"), &work.join("split/manifest.json"), cfg.ratios, cfg.seed)?;
    let manifest = work.join("prep/manifest.json");
    pipeline::preprocess(&cfg, &work.join("split/manifest.json"), &work.join("prep"))?;
    for modality in Modality::ALL {
        let conditions: Vec<WeatherCondition> =
            WeatherCondition::ALL.into_iter().filter(|&c| route(c).modality == modality).collect();
        let reports = pipeline::train(
            &cfg,
            &TrainRequest { manifest: &manifest, modality, conditions: &conditions, init: None },
        )?;
        let model = pipeline::model_path(&cfg.model_store, &reports[0].model_key);
        let eval = pipeline::evaluate(&model, &manifest, modality, roadsense::dataset::Split::Test)?;
        let keys: Vec<&str> = reports.iter().map(|r| r.model_key.as_str()).collect();
        println!("{modality}: test accuracy {:.2} -> {}", eval.report.accuracy, keys.join(", "));
    }

    let fog = WeatherReading::new(1.0, 10.0, 10.0, 5.0, 0.0);
    let day = WeatherReading::new(2.0, 20.0, 90.0, 38.0, 0.0);
    let segments = [(RoadClass::Gravel, fog, 5.12), (RoadClass::Asphalt, day, 2.56), (RoadClass::Pavement, day, 2.56)];
    let log = pipeline::synth_drive_log(&cfg, &work.join("drive"), &segments, 64)?;
    let sim = pipeline::simulate(&cfg, &WeatherClassifier::default(), &log)?;
    println!("\ndriven: gravel in fog, asphalt then pavement in daylight\n");
    print!("{}", sim.decisions);
    Ok(())
}
