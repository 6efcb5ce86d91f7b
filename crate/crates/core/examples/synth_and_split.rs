//! Generate a small synthetic dataset on disk for both modalities and split
//! it into train/val/test, stratified per modality and class.
//!
//! `cargo run --example synth_and_split [out_dir]`

use std::path::PathBuf;

use roadsense::dataset::{Split, SynthParams};
use roadsense::pipeline::{self, PipelineConfig};
use roadsense::weather::Modality;
use roadsense::RoadClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("roadsense-dataset"), PathBuf::from);
    let cfg = PipelineConfig {
        image_size: 32,
        synth: SynthParams { seed: 3, ..SynthParams::default() },
        ..PipelineConfig::default()
    };

    let raw = pipeline::synth(&cfg, &root.join("raw"), &Modality::ALL, 40)?;
    println!("generated {} items under {}", raw.entries.len(), root.join("raw").display());
    let split = pipeline::split(&root.join("raw/manifest.json"), &root.join("manifest.json"), [0.7, 0.15, 0.15], 7)?;

    println!("{:<16} {:>6} {:>6} {:>6}", "class", "train", "val", "test");
    for class in RoadClass::ALL {
        let n: Vec<usize> = Split::ALL.iter().map(|&s| split.count(s, class)).collect();
        println!("{:<16} {:>6} {:>6} {:>6}", class, n[0], n[1], n[2]);
    }
    println!("(counts cover both modalities; each gets floor(0.15 * 40) = 6 val and 6 test per class)");
    println!("first entry: {:?}", split.entries[0]);
    Ok(())
}
