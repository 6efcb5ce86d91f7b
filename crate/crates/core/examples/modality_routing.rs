//! Route each weather condition to a sensing modality and model key, then
//! route a few raw readings end to end.
//!
//! `cargo run --example modality_routing`

use roadsense::weather::{route, WeatherClassifier, WeatherCondition, WeatherReading};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<8} {:<13} model", "weather", "modality");
    for condition in WeatherCondition::ALL {
        let d = route(condition);
        println!("{:<8} {:<13} {}", condition, d.modality, d.model_key);
    }

    let classifier = WeatherClassifier::default();
    println!();
    for (wind, humidity, light, temperature, rain) in [
        (2.0, 20.0, 95.0, 38.0, 0.0),
        (2.0, 85.0, 20.0, 30.0, 90.0),
        (0.5, 15.0, 5.0, 3.0, 0.0),
        (6.0, 40.0, 60.0, 15.0, 5.0),
    ] {
        let reading = WeatherReading::new(wind, humidity, light, temperature, rain);
        let d = classifier.decide(&reading)?;
        println!("{:?} -> {} -> {}", reading.as_array(), d.condition, d.model_key);
    }
    Ok(())
}
