use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A rejection threshold that may be `+∞`.
///
/// Comparisons against [`Threshold::Infinite`] never report an exceedance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Infinite,
}

impl Threshold {
    pub fn is_exceeded_by(self, statistic: f64) -> bool {
        match self {
            Threshold::Finite(t) => statistic > t,
            Threshold::Infinite => false,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Threshold::Finite(t) => Some(t),
            Threshold::Infinite => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Threshold::Finite(_))
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite(t) => write!(f, "{t}"),
            Threshold::Infinite => f.write_str("inf"),
        }
    }
}

// Finite thresholds are JSON numbers, the sentinel is the string "inf".
impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Threshold::Finite(t) => s.serialize_f64(*t),
            Threshold::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(Threshold::Finite(t)),
            Raw::Str(s) if s == "inf" => Ok(Threshold::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid threshold `{s}`"))),
        }
    }
}

/// One statistic compared against its threshold.
///
/// `k` is the spacing scale; whole-sample statistics (variance, HC, KS) use `k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCheck {
    pub k: usize,
    pub statistic: f64,
    pub threshold: Threshold,
    pub exceeded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDecision {
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub triggering_scale: Option<usize>,
    pub per_scale: Vec<ScaleCheck>,
}

impl TestDecision {
    /// Builds a decision from individual checks; rejects iff any check exceeded.
    pub fn from_checks(per_scale: Vec<ScaleCheck>) -> Self {
        let triggering_scale = per_scale.iter().filter(|c| c.exceeded).map(|c| c.k).min();
        Self {
            reject: triggering_scale.is_some(),
            triggering_scale,
            per_scale,
        }
    }

    pub fn single(statistic: f64, threshold: f64) -> Self {
        Self::from_checks(vec![ScaleCheck {
            k: 0,
            statistic,
            threshold: Threshold::Finite(threshold),
            exceeded: statistic > threshold,
        }])
    }
}
