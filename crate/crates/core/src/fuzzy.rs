//! Mamdani-style fuzzy inference.
//!
//! Crisp inputs are fuzzified through piecewise-linear membership functions,
//! rules fire with a min-conjunction over their antecedent literals, label
//! activations are aggregated with max, and the categorical output is the
//! label with the highest aggregated activation (ties broken by a priority
//! list carried by the system).
//!
//! A rule literal is either a term (`"low"`) or its complement
//! (`"not high"`, degree `1 - μ_high`).

use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FuzzyError {
    #[error("invalid breakpoints {breakpoints:?}: {reason}")]
    InvalidBreakpoints { breakpoints: Vec<f64>, reason: String },
    #[error("variable `{variable}`: invalid universe [{lo}, {hi}]")]
    InvalidUniverse { variable: String, lo: f64, hi: f64 },
    #[error("variable `{variable}`, term `{term}`: breakpoint {value} outside universe [{lo}, {hi}]")]
    BreakpointOutsideUniverse { variable: String, term: String, value: f64, lo: f64, hi: f64 },
    #[error("variable `{variable}` has no terms")]
    NoTerms { variable: String },
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("duplicate output label `{0}`")]
    DuplicateOutput(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no term `{term}`")]
    UnknownTerm { variable: String, term: String },
    #[error("unknown output label `{0}`")]
    UnknownOutput(String),
    #[error("rule {index} has an empty antecedent")]
    EmptyAntecedent { index: usize },
    #[error("rule base is empty")]
    NoRules,
    #[error("output label set is empty")]
    NoOutputs,
    #[error("tie-break order must be a permutation of the output labels")]
    BadTieBreak,
    #[error("no crisp value or fuzzified degrees for variable `{0}`")]
    MissingInput(String),
    #[error("input for `{variable}` is not finite: {value}")]
    NonFinite { variable: String, value: f64 },
    #[error("no rule fired")]
    NoRuleFired,
    #[error("rule base json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("rule base io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, FuzzyError>;

/// Piecewise-linear membership function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembershipFunction {
    Triangle { a: f64, b: f64, c: f64 },
    Trapezoid { a: f64, b: f64, c: f64, d: f64 },
}

impl MembershipFunction {
    pub fn triangle(a: f64, b: f64, c: f64) -> Result<Self> {
        check_ordered(&[a, b, c])?;
        Ok(Self::Triangle { a, b, c })
    }

    pub fn trapezoid(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        check_ordered(&[a, b, c, d])?;
        Ok(Self::Trapezoid { a, b, c, d })
    }

    /// Three breakpoints make a triangle, four a trapezoid.
    pub fn from_breakpoints(points: &[f64]) -> Result<Self> {
        match *points {
            [a, b, c] => Self::triangle(a, b, c),
            [a, b, c, d] => Self::trapezoid(a, b, c, d),
            _ => Err(FuzzyError::InvalidBreakpoints {
                breakpoints: points.to_vec(),
                reason: "expected 3 (triangle) or 4 (trapezoid) breakpoints".into(),
            }),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Triangle { a, b, c } => vec![a, b, c],
            Self::Trapezoid { a, b, c, d } => vec![a, b, c, d],
        }
    }

    /// Degree of membership of `x`, always in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, c, d) = match *self {
            Self::Triangle { a, b, c } => (a, b, b, c),
            Self::Trapezoid { a, b, c, d } => (a, b, c, d),
        };
        if x < a || x > d {
            0.0
        } else if x >= b && x <= c {
            1.0
        } else if x < b {
            // a <= x < b, so b > a
            (x - a) / (b - a)
        } else {
            // c < x <= d, so d > c
            (d - x) / (d - c)
        }
    }
}

fn check_ordered(points: &[f64]) -> Result<()> {
    if points.iter().any(|p| !p.is_finite()) {
        return Err(FuzzyError::InvalidBreakpoints {
            breakpoints: points.to_vec(),
            reason: "breakpoints must be finite".into(),
        });
    }
    if points.windows(2).any(|w| w[0] > w[1]) {
        return Err(FuzzyError::InvalidBreakpoints {
            breakpoints: points.to_vec(),
            reason: "breakpoints must be non-decreasing".into(),
        });
    }
    Ok(())
}

/// A linguistic variable: a closed universe and its named terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyVariable {
    name: String,
    lo: f64,
    hi: f64,
    terms: IndexMap<String, MembershipFunction>,
}

impl FuzzyVariable {
    pub fn new(
        name: impl Into<String>,
        universe: (f64, f64),
        terms: impl IntoIterator<Item = (String, MembershipFunction)>,
    ) -> Result<Self> {
        let name = name.into();
        let (lo, hi) = universe;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FuzzyError::InvalidUniverse { variable: name, lo, hi });
        }
        let mut map = IndexMap::new();
        for (label, mf) in terms {
            for value in mf.breakpoints() {
                if value < lo || value > hi {
                    return Err(FuzzyError::BreakpointOutsideUniverse { variable: name, term: label, value, lo, hi });
                }
            }
            if map.insert(label.clone(), mf).is_some() {
                return Err(FuzzyError::InvalidBreakpoints {
                    breakpoints: mf.breakpoints(),
                    reason: format!("duplicate term `{label}` in variable `{name}`"),
                });
            }
        }
        if map.is_empty() {
            return Err(FuzzyError::NoTerms { variable: name });
        }
        Ok(Self { name, lo, hi, terms: map })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn universe(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn terms(&self) -> &IndexMap<String, MembershipFunction> {
        &self.terms
    }

    pub fn term(&self, label: &str) -> Option<&MembershipFunction> {
        self.terms.get(label)
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Degree of every term at `x`; inputs outside the universe are clamped first.
    pub fn fuzzify(&self, x: f64) -> IndexMap<String, f64> {
        let x = self.clamp(x);
        self.terms.iter().map(|(label, mf)| (label.clone(), mf.eval(x))).collect()
    }
}

/// One antecedent literal: a term, optionally complemented.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Literal {
    pub term: String,
    pub negated: bool,
}

impl Literal {
    pub fn is(term: impl Into<String>) -> Self {
        Self { term: term.into(), negated: false }
    }

    pub fn not(term: impl Into<String>) -> Self {
        Self { term: term.into(), negated: true }
    }

    pub fn parse(text: &str) -> Self {
        let text = text.trim();
        match text.strip_prefix("not ") {
            Some(rest) => Self::not(rest.trim()),
            None => Self::is(text),
        }
    }

    fn apply(&self, degree: f64) -> f64 {
        if self.negated {
            1.0 - degree
        } else {
            degree
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "not {}", self.term)
        } else {
            f.write_str(&self.term)
        }
    }
}

/// `IF v1 is t1 AND v2 is t2 ... THEN label`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyRule {
    pub antecedent: IndexMap<String, Literal>,
    pub consequent: String,
}

impl FuzzyRule {
    pub fn new<V, I>(antecedent: I, consequent: impl Into<String>) -> Self
    where
        V: Into<String>,
        I: IntoIterator<Item = (V, Literal)>,
    {
        Self { antecedent: antecedent.into_iter().map(|(v, l)| (v.into(), l)).collect(), consequent: consequent.into() }
    }
}

/// Term degrees per variable, as produced by [`FuzzyVariable::fuzzify`].
pub type Fuzzified = IndexMap<String, IndexMap<String, f64>>;

/// Activation of a rule: the minimum of its literal degrees.
pub fn fire_rule(rule: &FuzzyRule, fuzzified: &Fuzzified) -> Result<f64> {
    let mut activation: f64 = 1.0;
    for (variable, literal) in &rule.antecedent {
        let degrees = fuzzified.get(variable).ok_or_else(|| FuzzyError::MissingInput(variable.clone()))?;
        let degree = degrees
            .get(&literal.term)
            .ok_or_else(|| FuzzyError::UnknownTerm { variable: variable.clone(), term: literal.term.clone() })?;
        activation = activation.min(literal.apply(*degree));
    }
    Ok(activation)
}

/// Result of [`FuzzySystem::infer`].
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub label: String,
    /// Aggregated activation per output label, in declaration order.
    pub activations: IndexMap<String, f64>,
}

/// Picks the label with the largest activation; exact ties go to whichever
/// label comes first in `tie_break`. `None` when every activation is zero.
pub fn select_label<'a>(activations: &'a IndexMap<String, f64>, tie_break: &[String]) -> Option<&'a str> {
    let best = activations.values().copied().fold(0.0_f64, f64::max);
    if best <= 0.0 {
        return None;
    }
    tie_break
        .iter()
        .find(|label| activations.get(*label).copied() == Some(best))
        .and_then(|label| activations.get_key_value(label).map(|(k, _)| k.as_str()))
}

// Index form of a rule, used by the hot inference path.
#[derive(Debug, Clone)]
struct CompiledRule {
    literals: Vec<(usize, usize, bool)>,
    output: usize,
}

/// Scratch buffers of [`FuzzySystem::sweep`].
struct SweepState<'a> {
    axes: &'a [Vec<f64>],
    tables: &'a [Vec<f64>],
    by_rule: Vec<f64>,
    point: Vec<f64>,
    partial: Vec<Vec<f64>>,
    row_acts: Vec<f64>,
    activations: Vec<f64>,
}

/// Immutable rule base plus its variables and output labels.
#[derive(Debug, Clone)]
pub struct FuzzySystem {
    variables: Vec<FuzzyVariable>,
    output_labels: Vec<String>,
    rules: Vec<FuzzyRule>,
    tie_break: Vec<String>,
    compiled: Vec<CompiledRule>,
    // tie_break expressed as output indices
    priority: Vec<usize>,
}

impl FuzzySystem {
    pub fn new(
        variables: Vec<FuzzyVariable>,
        output_labels: Vec<String>,
        rules: Vec<FuzzyRule>,
        tie_break: Vec<String>,
    ) -> Result<Self> {
        if output_labels.is_empty() {
            return Err(FuzzyError::NoOutputs);
        }
        if rules.is_empty() {
            return Err(FuzzyError::NoRules);
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(FuzzyError::DuplicateVariable(v.name.clone()));
            }
        }
        for (i, label) in output_labels.iter().enumerate() {
            if output_labels[..i].contains(label) {
                return Err(FuzzyError::DuplicateOutput(label.clone()));
            }
        }
        let mut sorted_tb = tie_break.clone();
        let mut sorted_out = output_labels.clone();
        sorted_tb.sort();
        sorted_out.sort();
        if sorted_tb != sorted_out {
            return Err(FuzzyError::BadTieBreak);
        }

        let mut compiled = Vec::with_capacity(rules.len());
        for (index, rule) in rules.iter().enumerate() {
            if rule.antecedent.is_empty() {
                return Err(FuzzyError::EmptyAntecedent { index });
            }
            let output = output_labels
                .iter()
                .position(|l| *l == rule.consequent)
                .ok_or_else(|| FuzzyError::UnknownOutput(rule.consequent.clone()))?;
            let mut literals = Vec::with_capacity(rule.antecedent.len());
            for (name, literal) in &rule.antecedent {
                let vi = variables
                    .iter()
                    .position(|v| v.name == *name)
                    .ok_or_else(|| FuzzyError::UnknownVariable(name.clone()))?;
                let ti = variables[vi]
                    .terms
                    .get_index_of(&literal.term)
                    .ok_or_else(|| FuzzyError::UnknownTerm { variable: name.clone(), term: literal.term.clone() })?;
                literals.push((vi, ti, literal.negated));
            }
            compiled.push(CompiledRule { literals, output });
        }
        let priority =
            tie_break.iter().map(|l| output_labels.iter().position(|o| o == l).expect("checked permutation")).collect();

        Ok(Self { variables, output_labels, rules, tie_break, compiled, priority })
    }

    pub fn variables(&self) -> &[FuzzyVariable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&FuzzyVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn output_labels(&self) -> &[String] {
        &self.output_labels
    }

    pub fn rules(&self) -> &[FuzzyRule] {
        &self.rules
    }

    pub fn tie_break(&self) -> &[String] {
        &self.tie_break
    }

    /// Fuzzifies every variable that has a crisp value in `inputs`.
    pub fn fuzzify(&self, inputs: &IndexMap<String, f64>) -> Result<Fuzzified> {
        let mut out = Fuzzified::new();
        for v in &self.variables {
            if let Some(&x) = inputs.get(&v.name) {
                if !x.is_finite() {
                    return Err(FuzzyError::NonFinite { variable: v.name.clone(), value: x });
                }
                out.insert(v.name.clone(), v.fuzzify(x));
            }
        }
        Ok(out)
    }

    /// Runs the full inference for named crisp inputs.
    pub fn infer(&self, inputs: &IndexMap<String, f64>) -> Result<Inference> {
        let fuzzified = self.fuzzify(inputs)?;
        let mut activations: IndexMap<String, f64> = self.output_labels.iter().map(|l| (l.clone(), 0.0)).collect();
        for rule in &self.rules {
            let a = fire_rule(rule, &fuzzified)?;
            let slot = activations.get_mut(&rule.consequent).expect("validated consequent");
            *slot = slot.max(a);
        }
        let label = select_label(&activations, &self.tie_break).ok_or(FuzzyError::NoRuleFired)?.to_string();
        Ok(Inference { label, activations })
    }

    /// Inference over crisp inputs given positionally in variable order.
    /// Returns the winning output index; `activations` receives one value per
    /// output label.
    pub fn infer_indexed(&self, inputs: &[f64], activations: &mut [f64]) -> Result<usize> {
        if inputs.len() != self.variables.len() {
            let missing = self.variables[inputs.len().min(self.variables.len() - 1)].name.clone();
            return Err(FuzzyError::MissingInput(missing));
        }
        let degrees: Vec<Vec<f64>> = self
            .variables
            .iter()
            .zip(inputs)
            .map(|(v, &x)| {
                if !x.is_finite() {
                    return Err(FuzzyError::NonFinite { variable: v.name.clone(), value: x });
                }
                let x = v.clamp(x);
                Ok(v.terms.values().map(|mf| mf.eval(x)).collect())
            })
            .collect::<Result<_>>()?;
        activations.iter_mut().for_each(|a| *a = 0.0);
        for rule in &self.compiled {
            let a = rule.literals.iter().fold(1.0_f64, |acc, &(vi, ti, neg)| {
                let d = degrees[vi][ti];
                acc.min(if neg { 1.0 - d } else { d })
            });
            activations[rule.output] = activations[rule.output].max(a);
        }
        self.pick(activations).ok_or(FuzzyError::NoRuleFired)
    }

    /// Highest activation, ties to the earliest label in tie-break order;
    /// `None` when nothing fired.
    fn pick(&self, activations: &[f64]) -> Option<usize> {
        let mut best = 0.0;
        let mut winner = None;
        for &i in &self.priority {
            if activations[i] > best {
                best = activations[i];
                winner = Some(i);
            }
        }
        winner
    }

    /// Evaluates the system on every point of the Cartesian product of
    /// `axes` (one axis per variable, in variable order), calling `visit`
    /// with the point, the winning output index (or `None` if no rule fired)
    /// and the aggregated activations.
    ///
    /// Rule minima over the outer axes are carried down the loop nest; the
    /// innermost axis is reduced a whole row at a time, skipping rules whose
    /// outer minimum is already zero.
    pub fn sweep<F>(&self, axes: &[Vec<f64>], mut visit: F) -> Result<()>
    where
        F: FnMut(&[f64], Option<usize>, &[f64]),
    {
        if axes.len() != self.variables.len() {
            let missing = self.variables[axes.len().min(self.variables.len() - 1)].name.clone();
            return Err(FuzzyError::MissingInput(missing));
        }
        // literal degree per (axis, value index, rule); 1.0 when the rule
        // does not mention the variable
        let n_rules = self.compiled.len();
        let mut tables: Vec<Vec<f64>> = Vec::with_capacity(axes.len());
        for (vi, (var, axis)) in self.variables.iter().zip(axes).enumerate() {
            let mut table = vec![1.0; axis.len() * n_rules];
            for (k, &x) in axis.iter().enumerate() {
                if !x.is_finite() {
                    return Err(FuzzyError::NonFinite { variable: var.name.clone(), value: x });
                }
                let x = var.clamp(x);
                for (r, rule) in self.compiled.iter().enumerate() {
                    let mut d = 1.0_f64;
                    for &(lv, ti, neg) in &rule.literals {
                        if lv == vi {
                            let m = var.terms[ti].eval(x);
                            d = d.min(if neg { 1.0 - m } else { m });
                        }
                    }
                    table[k * n_rules + r] = d;
                }
            }
            tables.push(table);
        }
        // the innermost table is stored rule-major so each rule's row is contiguous
        let inner = axes.len() - 1;
        let len = axes[inner].len();
        let by_rule: Vec<f64> = (0..n_rules)
            .flat_map(|r| (0..len).map(move |k| (r, k)))
            .map(|(r, k)| tables[inner][k * n_rules + r])
            .collect();
        let mut state = SweepState {
            axes,
            tables: &tables,
            by_rule,
            point: vec![0.0; axes.len()],
            partial: vec![vec![1.0; n_rules]; axes.len()],
            row_acts: vec![0.0; self.output_labels.len() * len],
            activations: vec![0.0; self.output_labels.len()],
        };
        self.sweep_level(0, &mut state, &mut visit);
        Ok(())
    }

    fn sweep_level<F>(&self, level: usize, st: &mut SweepState, visit: &mut F)
    where
        F: FnMut(&[f64], Option<usize>, &[f64]),
    {
        let n_rules = self.compiled.len();
        let axes = st.axes;
        if level + 1 == axes.len() {
            let len = axes[level].len();
            st.row_acts.iter_mut().for_each(|a| *a = 0.0);
            for (r, rule) in self.compiled.iter().enumerate() {
                let above = st.partial[level][r];
                if above <= 0.0 {
                    continue;
                }
                let acts = &mut st.row_acts[rule.output * len..(rule.output + 1) * len];
                for (a, &d) in acts.iter_mut().zip(&st.by_rule[r * len..(r + 1) * len]) {
                    let m = if d < above { d } else { above };
                    if m > *a {
                        *a = m;
                    }
                }
            }
            for (k, &x) in axes[level].iter().enumerate() {
                st.point[level] = x;
                for (o, slot) in st.activations.iter_mut().enumerate() {
                    *slot = st.row_acts[o * len + k];
                }
                visit(&st.point, self.pick(&st.activations), &st.activations);
            }
            return;
        }
        for (k, &x) in axes[level].iter().enumerate() {
            st.point[level] = x;
            let row = &st.tables[level][k * n_rules..(k + 1) * n_rules];
            let (head, tail) = st.partial.split_at_mut(level + 1);
            for ((n, &a), &b) in tail[0].iter_mut().zip(&head[level]).zip(row) {
                *n = if a < b { a } else { b };
            }
            self.sweep_level(level + 1, st, visit);
        }
    }

    pub fn to_document(&self) -> RuleBaseDocument {
        RuleBaseDocument {
            variables: self
                .variables
                .iter()
                .map(|v| VariableDocument {
                    name: v.name.clone(),
                    universe: [v.lo, v.hi],
                    terms: v.terms.iter().map(|(k, mf)| (k.clone(), mf.breakpoints())).collect(),
                })
                .collect(),
            outputs: self.output_labels.clone(),
            tie_break: self.tie_break.clone(),
            rules: self
                .rules
                .iter()
                .map(|r| RuleDocument {
                    condition: r.antecedent.iter().map(|(k, l)| (k.clone(), l.to_string())).collect(),
                    then: r.consequent.clone(),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: RuleBaseDocument) -> Result<Self> {
        let variables = doc
            .variables
            .into_iter()
            .map(|v| {
                let terms = v
                    .terms
                    .into_iter()
                    .map(|(label, points)| Ok((label, MembershipFunction::from_breakpoints(&points)?)))
                    .collect::<Result<Vec<_>>>()?;
                FuzzyVariable::new(v.name, (v.universe[0], v.universe[1]), terms)
            })
            .collect::<Result<Vec<_>>>()?;
        let rules = doc
            .rules
            .into_iter()
            .map(|r| FuzzyRule {
                antecedent: r.condition.into_iter().map(|(k, l)| (k, Literal::parse(&l))).collect(),
                consequent: r.then,
            })
            .collect();
        Self::new(variables, doc.outputs, rules, doc.tie_break)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("rule base serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// JSON form of a rule base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleBaseDocument {
    pub variables: Vec<VariableDocument>,
    pub outputs: Vec<String>,
    pub tie_break: Vec<String>,
    pub rules: Vec<RuleDocument>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableDocument {
    pub name: String,
    pub universe: [f64; 2],
    pub terms: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDocument {
    #[serde(rename = "if")]
    pub condition: IndexMap<String, String>,
    pub then: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tri(a: f64, b: f64, c: f64) -> MembershipFunction {
        MembershipFunction::triangle(a, b, c).unwrap()
    }

    fn trap(a: f64, b: f64, c: f64, d: f64) -> MembershipFunction {
        MembershipFunction::trapezoid(a, b, c, d).unwrap()
    }

    fn wind() -> FuzzyVariable {
        FuzzyVariable::new(
            "wind",
            (0.0, 10.0),
            [
                ("low".to_string(), trap(0.0, 0.0, 3.0, 5.0)),
                ("medium".to_string(), tri(3.0, 5.0, 7.0)),
                ("high".to_string(), trap(5.0, 7.0, 10.0, 10.0)),
            ],
        )
        .unwrap()
    }

    fn toy_system(tie_break: &[&str]) -> FuzzySystem {
        let v = wind();
        let rules = vec![
            FuzzyRule::new([("wind", Literal::is("low"))], "calm"),
            FuzzyRule::new([("wind", Literal::is("medium"))], "breezy"),
            FuzzyRule::new([("wind", Literal::is("high"))], "stormy"),
        ];
        FuzzySystem::new(
            vec![v],
            vec!["calm".into(), "breezy".into(), "stormy".into()],
            rules,
            tie_break.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    fn inputs(pairs: &[(&str, f64)]) -> IndexMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn membership_examples() {
        assert_eq!(trap(0.0, 0.0, 3.0, 5.0).eval(0.0), 1.0);
        assert_eq!(trap(0.0, 0.0, 3.0, 5.0).eval(4.0), 0.5);
        assert_eq!(tri(3.0, 5.0, 7.0).eval(5.0), 1.0);
        assert_eq!(tri(0.0, 50.0, 100.0).eval(25.0), 0.5);
    }

    #[test]
    fn degenerate_shoulders() {
        let left = tri(0.0, 0.0, 50.0);
        assert_eq!(left.eval(0.0), 1.0);
        assert_eq!(left.eval(50.0), 0.0);
        let right = tri(50.0, 100.0, 100.0);
        assert_eq!(right.eval(100.0), 1.0);
        assert_eq!(right.eval(50.0), 0.0);
        assert_eq!(right.eval(101.0), 0.0);
        // a single-point triangle is a crisp spike
        assert_eq!(tri(2.0, 2.0, 2.0).eval(2.0), 1.0);
        assert_eq!(tri(2.0, 2.0, 2.0).eval(2.0001), 0.0);
    }

    #[test]
    fn malformed_breakpoints_rejected_at_construction() {
        assert!(MembershipFunction::triangle(3.0, 2.0, 5.0).is_err());
        assert!(MembershipFunction::trapezoid(0.0, 4.0, 3.0, 5.0).is_err());
        assert!(MembershipFunction::trapezoid(0.0, 1.0, 2.0, f64::NAN).is_err());
        assert!(MembershipFunction::from_breakpoints(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn breakpoints_must_sit_inside_universe() {
        let err = FuzzyVariable::new("x", (0.0, 1.0), [("a".to_string(), tri(0.0, 0.5, 2.0))]);
        assert!(matches!(err, Err(FuzzyError::BreakpointOutsideUniverse { .. })));
    }

    #[test]
    fn duplicate_terms_rejected() {
        let err = FuzzyVariable::new(
            "x",
            (0.0, 1.0),
            [("a".to_string(), tri(0.0, 0.5, 1.0)), ("a".to_string(), tri(0.0, 0.2, 1.0))],
        );
        assert!(err.is_err());
    }

    #[test]
    fn fuzzify_examples() {
        let w = wind();
        let d = w.fuzzify(4.0);
        assert_eq!(d["low"], 0.5);
        assert_eq!(d["medium"], 0.5);
        assert_eq!(d["high"], 0.0);
        assert_eq!(w.fuzzify(12.0), w.fuzzify(10.0));
        let top = w.fuzzify(10.0);
        assert_eq!((top["low"], top["medium"], top["high"]), (0.0, 0.0, 1.0));
    }

    #[test]
    fn fire_rule_is_min_over_literals() {
        let names = ["a", "b", "c", "d", "e"];
        let degrees = [0.8, 1.0, 0.6, 1.0, 1.0];
        let fuzzified: Fuzzified = names
            .iter()
            .zip(degrees)
            .map(|(n, d)| (n.to_string(), [("t".to_string(), d)].into_iter().collect()))
            .collect();
        let rule = FuzzyRule::new(names.iter().map(|n| (*n, Literal::is("t"))), "out");
        assert_eq!(fire_rule(&rule, &fuzzified).unwrap(), 0.6);

        let single = FuzzyRule::new([("a", Literal::is("t"))], "out");
        let mut f2 = fuzzified.clone();
        f2["a"]["t"] = 0.37;
        assert_eq!(fire_rule(&single, &f2).unwrap(), 0.37);
        f2["c"]["t"] = 0.0;
        assert_eq!(fire_rule(&rule, &f2).unwrap(), 0.0);
    }

    #[test]
    fn fire_rule_complement_literal() {
        let fuzzified: Fuzzified =
            [("a".to_string(), [("t".to_string(), 0.25)].into_iter().collect())].into_iter().collect();
        let rule = FuzzyRule::new([("a", Literal::not("t"))], "out");
        assert_eq!(fire_rule(&rule, &fuzzified).unwrap(), 0.75);
    }

    #[test]
    fn fire_rule_missing_variable_named() {
        let rule = FuzzyRule::new([("humidity", Literal::is("low"))], "x");
        match fire_rule(&rule, &Fuzzified::new()) {
            Err(FuzzyError::MissingInput(v)) => assert_eq!(v, "humidity"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn infer_saturated_rule() {
        let sys = toy_system(&["calm", "breezy", "stormy"]);
        let out = sys.infer(&inputs(&[("wind", 9.0)])).unwrap();
        assert_eq!(out.label, "stormy");
        assert_eq!(out.activations["stormy"], 1.0);
    }

    #[test]
    fn infer_tie_goes_to_priority() {
        // wind = 4: low 0.5, medium 0.5
        let a = toy_system(&["calm", "breezy", "stormy"]);
        assert_eq!(a.infer(&inputs(&[("wind", 4.0)])).unwrap().label, "calm");
        let b = toy_system(&["stormy", "breezy", "calm"]);
        assert_eq!(b.infer(&inputs(&[("wind", 4.0)])).unwrap().label, "breezy");
    }

    #[test]
    fn infer_no_rule_fired_is_error() {
        let v = wind();
        let sys = FuzzySystem::new(
            vec![v],
            vec!["calm".into()],
            vec![FuzzyRule::new([("wind", Literal::is("low"))], "calm")],
            vec!["calm".into()],
        )
        .unwrap();
        assert!(matches!(sys.infer(&inputs(&[("wind", 8.0)])), Err(FuzzyError::NoRuleFired)));
    }

    #[test]
    fn infer_missing_input() {
        let sys = toy_system(&["calm", "breezy", "stormy"]);
        assert!(matches!(sys.infer(&IndexMap::new()), Err(FuzzyError::MissingInput(_))));
    }

    #[test]
    fn system_validation() {
        let v = wind();
        let bad_term = FuzzySystem::new(
            vec![v.clone()],
            vec!["calm".into()],
            vec![FuzzyRule::new([("wind", Literal::is("gale"))], "calm")],
            vec!["calm".into()],
        );
        assert!(matches!(bad_term, Err(FuzzyError::UnknownTerm { .. })));
        let bad_out = FuzzySystem::new(
            vec![v.clone()],
            vec!["calm".into()],
            vec![FuzzyRule::new([("wind", Literal::is("low"))], "storm")],
            vec!["calm".into()],
        );
        assert!(matches!(bad_out, Err(FuzzyError::UnknownOutput(_))));
        let bad_tb = FuzzySystem::new(
            vec![v.clone()],
            vec!["calm".into(), "storm".into()],
            vec![FuzzyRule::new([("wind", Literal::is("low"))], "calm")],
            vec!["calm".into(), "calm".into()],
        );
        assert!(matches!(bad_tb, Err(FuzzyError::BadTieBreak)));
        let no_rules = FuzzySystem::new(vec![v], vec!["calm".into()], vec![], vec!["calm".into()]);
        assert!(matches!(no_rules, Err(FuzzyError::NoRules)));
    }

    #[test]
    fn json_round_trip_preserves_inference() {
        let sys = toy_system(&["breezy", "calm", "stormy"]);
        let back = FuzzySystem::from_json(&sys.to_json()).unwrap();
        assert_eq!(back.to_json(), sys.to_json());
        for i in 0..=100 {
            let x = i as f64 / 10.0;
            assert_eq!(sys.infer(&inputs(&[("wind", x)])).unwrap(), back.infer(&inputs(&[("wind", x)])).unwrap());
        }
    }

    #[test]
    fn json_literal_syntax() {
        let text = r#"{
            "variables": [{"name": "x", "universe": [0, 1], "terms": {"lo": [0, 0, 1], "hi": [0, 1, 1]}}],
            "outputs": ["a", "b"],
            "tie_break": ["b", "a"],
            "rules": [{"if": {"x": "not hi"}, "then": "a"}, {"if": {"x": "hi"}, "then": "b"}]
        }"#;
        let sys = FuzzySystem::from_json(text).unwrap();
        assert_eq!(sys.rules()[0].antecedent["x"], Literal::not("hi"));
        let out = sys.infer(&inputs(&[("x", 0.25)])).unwrap();
        assert_eq!(out.label, "a");
        assert_eq!(out.activations["a"], 0.75);
    }

    #[test]
    fn indexed_and_sweep_agree_with_infer() {
        let sys = toy_system(&["stormy", "calm", "breezy"]);
        let axis: Vec<f64> = (0..=120).map(|i| i as f64 / 10.0 - 1.0).collect();
        let mut acts = vec![0.0; 3];
        let mut seen = 0;
        sys.sweep(std::slice::from_ref(&axis), |p, winner, a| {
            let named = sys.infer(&inputs(&[("wind", p[0])])).unwrap();
            let idx = sys.output_labels().iter().position(|l| *l == named.label);
            assert_eq!(winner, idx);
            assert_eq!(a, named.activations.values().copied().collect::<Vec<_>>().as_slice());
            seen += 1;
        })
        .unwrap();
        assert_eq!(seen, axis.len());
        let w = sys.infer_indexed(&[8.0], &mut acts).unwrap();
        assert_eq!(sys.output_labels()[w], "stormy");
    }

    proptest! {
        #[test]
        fn degree_in_unit_interval(
            mut pts in proptest::collection::vec(-50.0f64..50.0, 4),
            x in -100.0f64..100.0,
            triangle in any::<bool>(),
        ) {
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mf = if triangle {
                MembershipFunction::from_breakpoints(&pts[..3]).unwrap()
            } else {
                MembershipFunction::from_breakpoints(&pts).unwrap()
            };
            let d = mf.eval(x);
            prop_assert!((0.0..=1.0).contains(&d));
        }

        #[test]
        fn edges_are_monotone(
            mut pts in proptest::collection::vec(-50.0f64..50.0, 4),
            x in -60.0f64..60.0,
            dx in 0.0f64..5.0,
        ) {
            pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mf = MembershipFunction::from_breakpoints(&pts).unwrap();
            let (a, b, c, d) = (pts[0], pts[1], pts[2], pts[3]);
            let y = x + dx;
            if x >= a && y <= b {
                prop_assert!(mf.eval(y) >= mf.eval(x));
            }
            if x >= c && y <= d {
                prop_assert!(mf.eval(y) <= mf.eval(x));
            }
        }

        #[test]
        fn argmax_invariant_under_positive_scaling(
            acts in proptest::collection::vec(0.0f64..1.0, 5),
            k in 0.01f64..100.0,
        ) {
            let labels: Vec<String> = (0..5).map(|i| format!("l{i}")).collect();
            let tb: Vec<String> = labels.iter().rev().cloned().collect();
            let a: IndexMap<String, f64> = labels.iter().cloned().zip(acts.iter().copied()).collect();
            let scaled: IndexMap<String, f64> =
                labels.iter().cloned().zip(acts.iter().map(|v| v * k)).collect();
            let l1 = select_label(&a, &tb).map(str::to_owned);
            let l2 = select_label(&scaled, &tb).map(str::to_owned);
            // scaling can only merge near-ties through rounding; ignore those cases
            let mut sorted = acts.clone();
            sorted.sort_by(|x, y| y.partial_cmp(x).unwrap());
            prop_assume!(sorted[0] == sorted[1] || sorted[0] - sorted[1] > 1e-9);
            prop_assert_eq!(l1, l2);
        }

        #[test]
        fn winner_has_maximal_activation(x in -2.0f64..12.0) {
            let sys = toy_system(&["breezy", "stormy", "calm"]);
            let out = sys.infer(&inputs(&[("wind", x)])).unwrap();
            let win = out.activations[&out.label];
            prop_assert!(out.activations.values().all(|&a| win >= a));
            prop_assert_eq!(sys.infer(&inputs(&[("wind", x)])).unwrap(), out);
        }
    }
}
