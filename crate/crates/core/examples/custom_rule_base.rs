//! Build a small Mamdani system by hand, run it, and round-trip it through
//! the JSON rule-base format used by `roadsense export-rules`.
//!
//! `cargo run --example custom_rule_base`

use indexmap::IndexMap;
use roadsense::fuzzy::{FuzzyRule, FuzzySystem, FuzzyVariable, Literal, MembershipFunction};

fn terms(spec: &[(&str, &[f64])]) -> Result<Vec<(String, MembershipFunction)>, roadsense::fuzzy::FuzzyError> {
    spec.iter().map(|(label, pts)| Ok((label.to_string(), MembershipFunction::from_breakpoints(pts)?))).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let speed = FuzzyVariable::new(
        "speed",
        (0.0, 130.0),
        terms(&[
            ("slow", &[0.0, 0.0, 30.0, 60.0]),
            ("cruise", &[30.0, 70.0, 110.0]),
            ("fast", &[80.0, 110.0, 130.0, 130.0]),
        ])?,
    )?;
    let grip =
        FuzzyVariable::new("grip", (0.0, 1.0), terms(&[("poor", &[0.0, 0.0, 0.6]), ("good", &[0.4, 1.0, 1.0])])?)?;
    let rules = vec![
        FuzzyRule::new([("grip", Literal::is("good"))], "relaxed"),
        FuzzyRule::new([("grip", Literal::is("poor")), ("speed", Literal::is("slow"))], "careful"),
        FuzzyRule::new([("grip", Literal::is("poor")), ("speed", Literal::not("slow"))], "alert"),
    ];
    let labels: Vec<String> = ["relaxed", "careful", "alert"].map(String::from).to_vec();
    let tie_break = vec!["alert".to_string(), "careful".to_string(), "relaxed".to_string()];
    let system = FuzzySystem::new(vec![speed, grip], labels, rules, tie_break)?;

    for (s, g) in [(20.0, 0.9), (20.0, 0.2), (95.0, 0.3), (60.0, 0.5)] {
        let inputs: IndexMap<String, f64> = [("speed".to_string(), s), ("grip".to_string(), g)].into_iter().collect();
        let out = system.infer(&inputs)?;
        let acts: Vec<String> = out.activations.iter().map(|(l, a)| format!("{l}={a:.2}")).collect();
        println!("speed {s:>5} grip {g:.1} -> {:<8} [{}]", out.label, acts.join(" "));
    }

    let json = system.to_json();
    let reloaded = FuzzySystem::from_json(&json)?;
    assert_eq!(reloaded.rules(), system.rules());
    println!("\n{json}");
    Ok(())
}
