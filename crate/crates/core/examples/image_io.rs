//! Write, read back and resize PGM/PPM images.
//!
//! `cargo run --example image_io [out_dir]`

use std::path::PathBuf;

use roadsense::dataset::{self, SynthParams};
use roadsense::image::ImageTensor;
use roadsense::weather::Modality;
use roadsense::RoadClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("roadsense-images"), PathBuf::from);
    std::fs::create_dir_all(&out)?;
    let params = SynthParams::default();
    let seed = dataset::item_seed(params.seed, Modality::Camera, RoadClass::Pavement, 0);
    let texture = dataset::synth_image(RoadClass::Pavement, 96, &params, seed)?;

    let gray = out.join("pavement.pgm");
    texture.write_pnm(&gray)?;
    let back = ImageTensor::read_pnm(&gray)?;
    let worst = texture.pixels().iter().zip(back.pixels()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} {:?}, 8-bit round trip error {worst:.4}", gray.display(), back.shape());

    let small = back.resize(24, 24)?;
    small.write_pnm(out.join("pavement_24.pgm"))?;
    let rgb = small.with_channels(3)?;
    rgb.write_pnm(out.join("pavement_24.ppm"))?;
    println!("resized to {:?}, expanded to {:?}", small.shape(), rgb.shape());
    let mean = |img: &ImageTensor| img.pixels().iter().sum::<f64>() / img.pixels().len() as f64;
    println!("mean brightness {:.3} -> {:.3}", mean(&back), mean(&small));
    Ok(())
}
