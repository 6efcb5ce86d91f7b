//! Confusion matrix and per-class precision/recall/F1 from label vectors,
//! printed as a table and as JSON.
//!
//! `cargo run --example classification_report`

use roadsense::metrics;
use roadsense::RoadClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let labels: Vec<String> = RoadClass::ALL.iter().map(|c| c.as_str().to_string()).collect();
    // rows are true classes, columns predictions
    let counts = [[56, 4, 0, 0, 0], [3, 57, 0, 0, 0], [0, 0, 54, 6, 0], [0, 0, 6, 54, 0], [0, 0, 0, 0, 60]];
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for (t, row) in counts.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            truth.extend(std::iter::repeat_n(t, n));
            predicted.extend(std::iter::repeat_n(p, n));
        }
    }
    let cm = metrics::confusion(&truth, &predicted, &labels)?;
    let report = metrics::report(&cm)?;
    print!("{}", report.to_table());
    println!("\n{}", serde_json::to_string_pretty(&report)?);

    // a class that is never predicted gets precision 0 and is flagged
    let cm = metrics::confusion(&[0, 1, 2], &[0, 0, 0], &labels[..3])?;
    println!("undefined: {:?}", metrics::report(&cm)?.undefined);
    Ok(())
}
