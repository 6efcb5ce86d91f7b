//! The five-input weather fuzzy system and the weather-to-sensor router.
//!
//! Inputs: wind speed on a normalized 0-10 scale, humidity, light level and
//! rain sensor in percent, temperature in °C (0-45). Each has low/medium/high
//! terms (rain: none/light/heavy).
//!
//! The rule base enumerates every two-level pattern over the five inputs
//! (2^5 = 32 rules). A two-level literal covers its whole half of the
//! universe, medium band included: "low" is evaluated as `not high` and
//! "high" as `not low` (rain: "none" as `not heavy`, "heavy" as `not none`).
//! With the plain terms the rule base would be silent wherever only a medium
//! term is active (light = 50, 20 °C ≤ temperature ≤ 30 °C, ...).

use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::fuzzy::{self, FuzzyRule, FuzzySystem, FuzzyVariable, Literal, MembershipFunction};

pub const WIND: &str = "wind";
pub const HUMIDITY: &str = "humidity";
pub const LIGHT: &str = "light";
pub const TEMPERATURE: &str = "temperature";
pub const RAIN: &str = "rain";

/// Variable order used for positional inputs.
pub const VARIABLES: [&str; 5] = [WIND, HUMIDITY, LIGHT, TEMPERATURE, RAIN];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeatherReading {
    pub wind_speed: f64,
    pub humidity: f64,
    pub light_level: f64,
    pub temperature: f64,
    pub rain_sensor: f64,
}

impl WeatherReading {
    pub fn new(wind_speed: f64, humidity: f64, light_level: f64, temperature: f64, rain_sensor: f64) -> Self {
        Self { wind_speed, humidity, light_level, temperature, rain_sensor }
    }

    /// Values in [`VARIABLES`] order.
    pub fn as_array(&self) -> [f64; 5] {
        [self.wind_speed, self.humidity, self.light_level, self.temperature, self.rain_sensor]
    }

    pub fn as_inputs(&self) -> IndexMap<String, f64> {
        VARIABLES.iter().map(|v| v.to_string()).zip(self.as_array()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeatherCondition {
    Sunny,
    Rainy,
    Foggy,
    Night,
    Day,
}

impl WeatherCondition {
    pub const ALL: [WeatherCondition; 5] = [Self::Sunny, Self::Rainy, Self::Foggy, Self::Night, Self::Day];

    /// Ties between equally activated conditions go to the earliest entry:
    /// conditions that route to the accelerometer win.
    pub const TIE_BREAK: [WeatherCondition; 5] = [Self::Foggy, Self::Rainy, Self::Night, Self::Day, Self::Sunny];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Sunny => "sunny",
            Self::Rainy => "rainy",
            Self::Foggy => "foggy",
            Self::Night => "night",
            Self::Day => "day",
        }
    }
}

impl fmt::Display for WeatherCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for WeatherCondition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| format!("unknown weather condition `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Camera,
    Acceleration,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Self::Camera, Self::Acceleration];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Camera => "camera",
            Self::Acceleration => "acceleration",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| format!("unknown modality `{s}`"))
    }
}

/// Name of the model trained for a (modality, condition) pair.
pub fn model_key(modality: Modality, condition: WeatherCondition) -> String {
    format!("{modality}-{condition}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingDecision {
    pub condition: WeatherCondition,
    pub modality: Modality,
    pub model_key: String,
    pub activations: IndexMap<WeatherCondition, f64>,
}

/// Rainy, foggy and night driving use the accelerometer; sunny and daytime
/// driving use the camera.
pub fn route(condition: WeatherCondition) -> RoutingDecision {
    let modality = match condition {
        WeatherCondition::Rainy | WeatherCondition::Foggy | WeatherCondition::Night => Modality::Acceleration,
        WeatherCondition::Sunny | WeatherCondition::Day => Modality::Camera,
    };
    RoutingDecision { condition, modality, model_key: model_key(modality, condition), activations: IndexMap::new() }
}

/// Two-level rule pattern value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Low,
    High,
}

impl Level {
    fn literal(self, var: &str) -> Literal {
        let (low, high) = if var == RAIN { ("none", "heavy") } else { ("low", "high") };
        match self {
            Level::Low => Literal::not(high),
            Level::High => Literal::not(low),
        }
    }
}

use Level::{High, Low};
use WeatherCondition::{Day, Foggy, Night, Rainy, Sunny};

/// The eight published sample rules, columns (wind, humidity, light,
/// temperature, rain). For rain, `Low` means none and `High` heavy.
pub const SAMPLE_RULES: [([Level; 5], WeatherCondition); 8] = [
    ([Low, Low, Low, Low, Low], Foggy),
    ([Low, Low, High, High, Low], Day),
    ([Low, High, Low, High, Low], Rainy),
    ([Low, High, High, Low, High], Day),
    ([High, Low, Low, Low, Low], Foggy),
    ([High, Low, High, High, Low], Day),
    ([High, High, Low, High, Low], Rainy),
    ([High, High, High, Low, High], Day),
];

/// Consequent for a pattern not covered by [`SAMPLE_RULES`]. Wind does not
/// influence the outcome.
pub fn completion_consequent(pattern: [Level; 5]) -> WeatherCondition {
    let [_wind, humidity, light, temperature, rain] = pattern;
    match (light, rain, humidity, temperature) {
        (Low, High, _, _) => Rainy,
        (Low, Low, Low, Low) => Foggy,
        (Low, Low, Low, High) => Night,
        (Low, Low, High, _) => Rainy,
        (High, Low, Low, High) => Day,
        (High, Low, Low, Low) => Sunny,
        (High, _, _, _) => Day,
    }
}

/// All 32 rule patterns: the sample rules first, then the remaining patterns
/// in binary order (wind most significant, `Low` = 0).
pub fn rule_patterns() -> Vec<([Level; 5], WeatherCondition)> {
    let mut out: Vec<_> = SAMPLE_RULES.to_vec();
    for bits in 0u32..32 {
        let pattern: [Level; 5] = std::array::from_fn(|i| if bits >> (4 - i) & 1 == 1 { High } else { Low });
        if SAMPLE_RULES.iter().all(|(p, _)| *p != pattern) {
            out.push((pattern, completion_consequent(pattern)));
        }
    }
    out
}

fn mf(points: &[f64]) -> MembershipFunction {
    MembershipFunction::from_breakpoints(points).expect("static breakpoints are ordered")
}

fn variable(name: &str, universe: (f64, f64), terms: [(&str, &[f64]); 3]) -> FuzzyVariable {
    FuzzyVariable::new(name, universe, terms.map(|(label, pts)| (label.to_string(), mf(pts))))
        .expect("static variable is valid")
}

/// Builds the weather system with its 32-rule base.
pub fn build_weather_system() -> FuzzySystem {
    let percent_terms: [(&str, &[f64]); 3] =
        [("low", &[0.0, 0.0, 50.0]), ("medium", &[0.0, 50.0, 100.0]), ("high", &[50.0, 100.0, 100.0])];
    let variables = vec![
        variable(
            WIND,
            (0.0, 10.0),
            [("low", &[0.0, 0.0, 3.0, 5.0]), ("medium", &[3.0, 5.0, 7.0]), ("high", &[5.0, 7.0, 10.0, 10.0])],
        ),
        variable(HUMIDITY, (0.0, 100.0), percent_terms),
        variable(LIGHT, (0.0, 100.0), percent_terms),
        variable(
            TEMPERATURE,
            (0.0, 45.0),
            [("low", &[0.0, 0.0, 10.0, 20.0]), ("medium", &[10.0, 22.0, 30.0]), ("high", &[30.0, 35.0, 45.0, 45.0])],
        ),
        variable(
            RAIN,
            (0.0, 100.0),
            [("none", &[0.0, 0.0, 50.0]), ("light", &[0.0, 50.0, 100.0]), ("heavy", &[50.0, 100.0, 100.0])],
        ),
    ];
    let rules = rule_patterns()
        .into_iter()
        .map(|(pattern, condition)| {
            FuzzyRule::new(VARIABLES.iter().zip(pattern).map(|(v, level)| (*v, level.literal(v))), condition.as_str())
        })
        .collect();
    FuzzySystem::new(
        variables,
        WeatherCondition::ALL.iter().map(|c| c.as_str().to_string()).collect(),
        rules,
        WeatherCondition::TIE_BREAK.iter().map(|c| c.as_str().to_string()).collect(),
    )
    .expect("static weather system is valid")
}

/// Fuzzy weather classifier; wraps any system whose outputs are the five
/// condition labels (the built-in one or a rule base loaded from JSON).
#[derive(Debug, Clone)]
pub struct WeatherClassifier {
    system: FuzzySystem,
    conditions: Vec<WeatherCondition>,
}

impl Default for WeatherClassifier {
    fn default() -> Self {
        Self::new(build_weather_system()).expect("built-in system has weather outputs")
    }
}

impl WeatherClassifier {
    pub fn new(system: FuzzySystem) -> Result<Self, fuzzy::FuzzyError> {
        let conditions = system
            .output_labels()
            .iter()
            .map(|l| l.parse().map_err(|_| fuzzy::FuzzyError::UnknownOutput(l.clone())))
            .collect::<Result<Vec<WeatherCondition>, _>>()?;
        for v in VARIABLES {
            if system.variable(v).is_none() {
                return Err(fuzzy::FuzzyError::UnknownVariable(v.to_string()));
            }
        }
        Ok(Self { system, conditions })
    }

    pub fn system(&self) -> &FuzzySystem {
        &self.system
    }

    pub fn classify(
        &self,
        reading: &WeatherReading,
    ) -> Result<(WeatherCondition, IndexMap<WeatherCondition, f64>), fuzzy::FuzzyError> {
        let out = self.system.infer(&reading.as_inputs())?;
        let activations = self.conditions.iter().copied().zip(out.activations.values().copied()).collect();
        let condition = out.label.parse().expect("validated output label");
        Ok((condition, activations))
    }

    /// Classifies and routes in one step.
    pub fn decide(&self, reading: &WeatherReading) -> Result<RoutingDecision, fuzzy::FuzzyError> {
        let (condition, activations) = self.classify(reading)?;
        Ok(RoutingDecision { activations, ..route(condition) })
    }
}

/// Classifies with the built-in weather system.
pub fn classify_weather(
    reading: &WeatherReading,
) -> Result<(WeatherCondition, IndexMap<WeatherCondition, f64>), fuzzy::FuzzyError> {
    WeatherClassifier::default().classify(reading)
}
