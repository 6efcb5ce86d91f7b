//! Train the mini-VGG preset on synthetic camera textures held in memory,
//! with early stopping on a validation split, then report test accuracy.
//!
//! `cargo run --release --example train_micro_cnn`

use roadsense::dataset::{self, SynthParams};
use roadsense::metrics;
use roadsense::neural::{self, Example, ModelSpec, TrainConfig};
use roadsense::weather::Modality;
use roadsense::RoadClass;

fn examples(
    params: &SynthParams,
    size: usize,
    range: std::ops::Range<u64>,
) -> Result<Vec<Example>, dataset::DatasetError> {
    let mut out = Vec::new();
    for class in RoadClass::ALL {
        for i in range.clone() {
            let seed = dataset::item_seed(params.seed, Modality::Camera, class, i);
            out.push(Example::from_image(&dataset::synth_image(class, size, params, seed)?, class.index()));
        }
    }
    Ok(out)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let size = 32;
    let params = SynthParams::default();
    let train = examples(&params, size, 0..60)?;
    let val = examples(&params, size, 60..75)?;
    let test = examples(&params, size, 75..95)?;

    let spec = ModelSpec::mini_vgg(size, size, 1, RoadClass::COUNT)?;
    println!("mini-vgg: {} parameters", spec.num_parameters()?);
    let cfg = TrainConfig { learning_rate: 1e-3, max_epochs: 15, patience: 4, ..TrainConfig::default() };
    let model = neural::train(&spec, &train, &val, &cfg)?;
    for e in &model.meta.history {
        println!("epoch {:>2}  train {:.4}  val {:.4}", e.epoch, e.train_loss, e.val_loss);
    }
    println!("best epoch {} (stopped early: {})", model.meta.best_epoch, model.meta.stopped_early);

    let labels: Vec<String> = RoadClass::ALL.iter().map(|c| c.as_str().to_string()).collect();
    let mut predicted = Vec::new();
    for e in &test {
        predicted.push(neural::argmax(&model.forward_planar(&e.input)?));
    }
    let truth: Vec<usize> = test.iter().map(|e| e.label).collect();
    let report = metrics::report(&metrics::confusion(&truth, &predicted, &labels)?)?;
    print!("\n{}", report.to_table());
    Ok(())
}
