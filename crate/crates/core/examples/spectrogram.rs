//! Turn synthetic z-axis acceleration streams into spectrogram images, one
//! per road class, and print where each class puts its spectral energy.
//!
//! `cargo run --example spectrogram [out_dir]`

use std::path::PathBuf;

use roadsense::dataset::{self, SynthParams};
use roadsense::signal::{self, SignalConfig};
use roadsense::weather::Modality;
use roadsense::RoadClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out =
        std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("roadsense-spectrograms"), PathBuf::from);
    std::fs::create_dir_all(&out)?;
    let params = SynthParams::default();
    let cfg = SignalConfig::default();
    let duration = cfg.window_len as f64 / cfg.sample_rate;

    println!("{:<16} {:>8} {:>9} {:>9}", "class", "rms", "<5 Hz", ">=15 Hz");
    for class in RoadClass::ALL {
        let seed = dataset::item_seed(params.seed, Modality::Acceleration, class, 0);
        let stream = dataset::synth_accel(class, duration, &params, seed)?;
        let window = signal::segment(&stream, cfg.sample_rate, cfg.window_len, cfg.hop)?.remove(0);
        let spec = signal::stft(&window, cfg.fft_size, cfg.frame_hop, cfg.taper)?;

        let mut low = 0.0;
        let mut high = 0.0;
        for bin in 0..spec.bins() {
            let energy: f64 = (0..spec.frames()).map(|t| spec.get(bin, t).powi(2)).sum();
            let f = spec.bin_frequency(bin);
            if f < 5.0 {
                low += energy;
            } else if f >= 15.0 {
                high += energy;
            }
        }
        let total: f64 = spec.magnitudes().iter().map(|m| m * m).sum();
        let rms = (stream.iter().map(|x| x * x).sum::<f64>() / stream.len() as f64).sqrt();
        println!("{:<16} {rms:>8.3} {:>8.1}% {:>8.1}%", class, 100.0 * low / total, 100.0 * high / total);

        let image = cfg.window_image(&window)?;
        image.write_pnm(out.join(format!("{class}.pgm")))?;
    }
    println!("\nimages in {}", out.display());
    Ok(())
}
