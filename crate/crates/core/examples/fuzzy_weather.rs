//! Classify weather readings with the built-in 32-rule fuzzy system and show
//! the per-condition activations and the term degrees behind them.
//!
//! `cargo run --example fuzzy_weather`

use roadsense::weather::{self, WeatherClassifier, WeatherReading};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let classifier = WeatherClassifier::default();
    let system = classifier.system();
    println!("{} variables, {} rules", system.variables().len(), system.rules().len());

    let readings = [
        ("calm, dark, cold, dry", WeatherReading::new(1.0, 10.0, 10.0, 5.0, 0.0)),
        ("bright and hot", WeatherReading::new(1.0, 10.0, 90.0, 40.0, 0.0)),
        ("humid, dark, warm", WeatherReading::new(1.0, 90.0, 10.0, 40.0, 0.0)),
        ("windy, bright, heavy rain", WeatherReading::new(9.0, 90.0, 90.0, 5.0, 95.0)),
        ("midpoints: all rules tie", WeatherReading::new(5.0, 50.0, 50.0, 22.0, 50.0)),
    ];
    for (name, reading) in readings {
        let (condition, activations) = classifier.classify(&reading)?;
        let acts: Vec<String> = activations.iter().map(|(c, a)| format!("{c}={a:.2}")).collect();
        println!("{name:<26} -> {condition:<6} [{}]", acts.join(" "));
    }

    // term degrees for one reading
    let reading = WeatherReading::new(4.0, 30.0, 75.0, 26.0, 10.0);
    println!("\nterm degrees for {:?}", reading.as_array());
    for (var, value) in weather::VARIABLES.iter().zip(reading.as_array()) {
        let degrees = system.variable(var).expect("built-in variable").fuzzify(value);
        let terms: Vec<String> = degrees.iter().map(|(t, d)| format!("{t}={d:.2}")).collect();
        println!("  {var:<12} {value:>5}: {}", terms.join(" "));
    }
    println!("-> {}", classifier.classify(&reading)?.0);
    Ok(())
}
