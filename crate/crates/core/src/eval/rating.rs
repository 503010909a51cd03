use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::EvalError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    ConstraintViolations,
    ImplicitAssumptions,
    StructuralClarity,
}

impl Criterion {
    pub const ALL: [Criterion; 3] =
        [Criterion::ConstraintViolations, Criterion::ImplicitAssumptions, Criterion::StructuralClarity];

    /// Column name in the plot data.
    pub fn key(self) -> &'static str {
        match self {
            Criterion::ConstraintViolations => "constraint_violations",
            Criterion::ImplicitAssumptions => "implicit_assumptions",
            Criterion::StructuralClarity => "structural_clarity",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Criterion::ConstraintViolations => "Constraint Violations",
            Criterion::ImplicitAssumptions => "Implicit Assumptions",
            Criterion::StructuralClarity => "Structural Clarity",
        }
    }
}

impl FromStr for Criterion {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "constraint_violations" => Ok(Criterion::ConstraintViolations),
            "implicit_assumptions" => Ok(Criterion::ImplicitAssumptions),
            "clarity" | "structural_clarity" => Ok(Criterion::StructuralClarity),
            _ => Err(EvalError::UnknownCriterion(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    Low,
    Medium,
    MediumHigh,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Frequency {
    Rare,
    Occasional,
    Frequent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QualitativeRating {
    Level(Level),
    Frequency(Frequency),
}

impl QualitativeRating {
    pub fn label(self) -> &'static str {
        match self {
            QualitativeRating::Level(Level::Low) => "Low",
            QualitativeRating::Level(Level::Medium) => "Medium",
            QualitativeRating::Level(Level::MediumHigh) => "Medium-High",
            QualitativeRating::Level(Level::High) => "High",
            QualitativeRating::Frequency(Frequency::Rare) => "Rare",
            QualitativeRating::Frequency(Frequency::Occasional) => "Occasional",
            QualitativeRating::Frequency(Frequency::Frequent) => "Frequent",
        }
    }

    /// Parses a rating label. Hyphens and en dashes are interchangeable, and
    /// "Medium-Low" is read as Medium: it sits at 2 on the numeric scale.
    pub fn parse_label(s: &str) -> Option<QualitativeRating> {
        let norm = s.trim().replace(['\u{2013}', '\u{2014}'], "-").to_ascii_lowercase();
        Some(match norm.as_str() {
            "low" => QualitativeRating::Level(Level::Low),
            "medium" | "medium-low" => QualitativeRating::Level(Level::Medium),
            "medium-high" => QualitativeRating::Level(Level::MediumHigh),
            "high" => QualitativeRating::Level(Level::High),
            "rare" => QualitativeRating::Frequency(Frequency::Rare),
            "occasional" => QualitativeRating::Frequency(Frequency::Occasional),
            "frequent" => QualitativeRating::Frequency(Frequency::Frequent),
            _ => return None,
        })
    }
}

impl fmt::Display for QualitativeRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl Serialize for QualitativeRating {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for QualitativeRating {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        QualitativeRating::parse_label(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown rating `{s}`")))
    }
}

pub fn qualitative_to_numeric(rating: QualitativeRating) -> u8 {
    match rating {
        QualitativeRating::Level(Level::Low) => 1,
        QualitativeRating::Level(Level::Medium) => 2,
        QualitativeRating::Level(Level::MediumHigh) => 3,
        QualitativeRating::Level(Level::High) => 4,
        QualitativeRating::Frequency(Frequency::Rare) => 1,
        QualitativeRating::Frequency(Frequency::Occasional) => 2,
        QualitativeRating::Frequency(Frequency::Frequent) => 3,
    }
}

/// Band edges for the qualitative mapping. Violation and assumption bands
/// include their upper edge; clarity bands exclude it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub constraint_violations_low: f64,
    pub constraint_violations_medium: f64,
    pub constraint_violations_medium_high: f64,
    pub implicit_assumptions_rare: f64,
    pub implicit_assumptions_occasional: f64,
    pub structural_clarity_low: f64,
    pub structural_clarity_medium: f64,
    pub structural_clarity_medium_high: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            constraint_violations_low: 0.25,
            constraint_violations_medium: 1.0,
            constraint_violations_medium_high: 2.0,
            implicit_assumptions_rare: 0.25,
            implicit_assumptions_occasional: 1.0,
            structural_clarity_low: 0.4,
            structural_clarity_medium: 0.7,
            structural_clarity_medium_high: 0.9,
        }
    }
}

impl Thresholds {
    const KEYS: [&'static str; 8] = [
        "constraint_violations.low",
        "constraint_violations.medium",
        "constraint_violations.medium_high",
        "implicit_assumptions.rare",
        "implicit_assumptions.occasional",
        "structural_clarity.low",
        "structural_clarity.medium",
        "structural_clarity.medium_high",
    ];

    fn slots(&mut self) -> [&mut f64; 8] {
        [
            &mut self.constraint_violations_low,
            &mut self.constraint_violations_medium,
            &mut self.constraint_violations_medium_high,
            &mut self.implicit_assumptions_rare,
            &mut self.implicit_assumptions_occasional,
            &mut self.structural_clarity_low,
            &mut self.structural_clarity_medium,
            &mut self.structural_clarity_medium_high,
        ]
    }

    /// Applies `key = value` overrides on top of the defaults. `#` starts a
    /// comment.
    pub fn from_config(text: &str) -> Result<Thresholds, EvalError> {
        let mut t = Thresholds::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| EvalError::Config { line: i + 1, message };
            let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got `{line}`")))?;
            let (k, v) = (k.trim(), v.trim());
            let pos = Self::KEYS.iter().position(|x| *x == k).ok_or_else(|| err(format!("unknown key `{k}`")))?;
            let value: f64 = v.parse().map_err(|_| err(format!("`{v}` is not a number")))?;
            if !value.is_finite() {
                return Err(err(format!("`{v}` is not finite")));
            }
            *t.slots()[pos] = value;
        }
        let ordered = t.constraint_violations_low <= t.constraint_violations_medium
            && t.constraint_violations_medium <= t.constraint_violations_medium_high
            && t.implicit_assumptions_rare <= t.implicit_assumptions_occasional
            && t.structural_clarity_low <= t.structural_clarity_medium
            && t.structural_clarity_medium <= t.structural_clarity_medium_high;
        if !ordered {
            return Err(EvalError::Config { line: 0, message: "band edges must be nondecreasing".into() });
        }
        Ok(t)
    }

    pub fn to_config(&self) -> String {
        let mut copy = *self;
        Self::KEYS.iter().zip(copy.slots()).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn map_to_qualitative(criterion: Criterion, mean: f64, t: &Thresholds) -> QualitativeRating {
    use QualitativeRating as Q;
    match criterion {
        Criterion::ConstraintViolations => Q::Level(if mean <= t.constraint_violations_low {
            Level::Low
        } else if mean <= t.constraint_violations_medium {
            Level::Medium
        } else if mean <= t.constraint_violations_medium_high {
            Level::MediumHigh
        } else {
            Level::High
        }),
        Criterion::ImplicitAssumptions => Q::Frequency(if mean <= t.implicit_assumptions_rare {
            Frequency::Rare
        } else if mean <= t.implicit_assumptions_occasional {
            Frequency::Occasional
        } else {
            Frequency::Frequent
        }),
        Criterion::StructuralClarity => Q::Level(if mean < t.structural_clarity_low {
            Level::Low
        } else if mean < t.structural_clarity_medium {
            Level::Medium
        } else if mean < t.structural_clarity_medium_high {
            Level::MediumHigh
        } else {
            Level::High
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rate(c: Criterion, m: f64) -> QualitativeRating {
        map_to_qualitative(c, m, &Thresholds::default())
    }

    #[test]
    fn documented_examples() {
        assert_eq!(rate(Criterion::ConstraintViolations, 0.0).label(), "Low");
        assert_eq!(rate(Criterion::StructuralClarity, 1.0).label(), "High");
        assert_eq!(rate(Criterion::ImplicitAssumptions, 0.5).label(), "Occasional");
    }

    #[test]
    fn band_edges() {
        assert_eq!(rate(Criterion::ConstraintViolations, 0.25).label(), "Low");
        assert_eq!(rate(Criterion::ConstraintViolations, 1.0).label(), "Medium");
        assert_eq!(rate(Criterion::ConstraintViolations, 2.0).label(), "Medium-High");
        assert_eq!(rate(Criterion::ConstraintViolations, 2.01).label(), "High");
        assert_eq!(rate(Criterion::ImplicitAssumptions, 1.0).label(), "Occasional");
        assert_eq!(rate(Criterion::ImplicitAssumptions, 1.5).label(), "Frequent");
        assert_eq!(rate(Criterion::StructuralClarity, 0.39).label(), "Low");
        assert_eq!(rate(Criterion::StructuralClarity, 0.4).label(), "Medium");
        assert_eq!(rate(Criterion::StructuralClarity, 0.7).label(), "Medium-High");
        assert_eq!(rate(Criterion::StructuralClarity, 0.9).label(), "High");
    }

    #[test]
    fn numeric_scale() {
        let labels = ["Low", "Medium", "Medium-High", "High", "Rare", "Occasional", "Frequent"];
        let want = [1, 2, 3, 4, 1, 2, 3];
        for (l, w) in labels.iter().zip(want) {
            assert_eq!(qualitative_to_numeric(QualitativeRating::parse_label(l).unwrap()), w, "{l}");
        }
        assert_eq!(QualitativeRating::parse_label("Medium\u{2013}Low"), QualitativeRating::parse_label("Medium"));
        assert_eq!(QualitativeRating::parse_label("sometimes"), None);
    }

    #[test]
    fn criterion_names() {
        assert_eq!("constraint-violations".parse::<Criterion>().unwrap(), Criterion::ConstraintViolations);
        assert_eq!("clarity".parse::<Criterion>().unwrap(), Criterion::StructuralClarity);
        assert!(matches!("speed".parse::<Criterion>(), Err(EvalError::UnknownCriterion(_))));
    }

    #[test]
    fn config_overrides() {
        let t = Thresholds::from_config("# tighter\nconstraint_violations.low = 0.1\n\nstructural_clarity.medium_high=0.95 # note\n")
            .unwrap();
        assert_eq!(t.constraint_violations_low, 0.1);
        assert_eq!(t.structural_clarity_medium_high, 0.95);
        assert_eq!(Thresholds::from_config(&t.to_config()).unwrap(), t);
        assert!(Thresholds::from_config("nope = 1").is_err());
        assert!(Thresholds::from_config("constraint_violations.low = x").is_err());
        assert!(Thresholds::from_config("constraint_violations.low = 5").is_err());
    }

    proptest! {
        #[test]
        fn mapping_is_monotone(a in 0.0f64..6.0, b in 0.0f64..6.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            for c in [Criterion::ConstraintViolations, Criterion::ImplicitAssumptions] {
                prop_assert!(qualitative_to_numeric(rate(c, lo)) <= qualitative_to_numeric(rate(c, hi)));
            }
            let (lo, hi) = (lo / 6.0, hi / 6.0);
            prop_assert!(qualitative_to_numeric(rate(Criterion::StructuralClarity, lo))
                <= qualitative_to_numeric(rate(Criterion::StructuralClarity, hi)));
        }
    }
}
