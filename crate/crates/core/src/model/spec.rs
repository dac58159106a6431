//! On-disk model description. These types mirror the JSON schema one to one;
//! [`crate::model::validate_model`] turns them into a [`ValidatedModel`].
//!
//! [`ValidatedModel`]: crate::model::ValidatedModel

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

impl Horizon {
    pub fn finite(self) -> Option<usize> {
        match self {
            Horizon::Finite(t) => Some(t),
            Horizon::Infinite => None,
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(t) => write!(f, "{t}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "inf" | "INFINITE" | "infinite" => Ok(Horizon::Infinite),
            _ => match s.parse::<usize>() {
                Ok(t) if t >= 1 => Ok(Horizon::Finite(t)),
                _ => Err(format!("horizon must be a positive integer or \"inf\", got {s:?}")),
            },
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(t) => s.serialize_u64(*t as u64),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct HorizonVisitor;
        impl Visitor<'_> for HorizonVisitor {
            type Value = Horizon;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or the string \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Horizon, E> {
                if v == 0 {
                    return Err(E::custom("horizon must be at least 1"));
                }
                Ok(Horizon::Finite(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Horizon, E> {
                if v < 1 {
                    return Err(E::custom("horizon must be at least 1"));
                }
                Ok(Horizon::Finite(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Horizon, E> {
                v.parse().map_err(E::custom)
            }
        }
        d.deserialize_any(HorizonVisitor)
    }
}

/// Affine weight functional `w(z) = const + coeffs . z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    #[serde(rename = "const")]
    pub constant: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    /// `[K][Nx^N][Nx^N * Na^N]`: rows are next joint types, columns are
    /// `joint_x * Na^N + joint_a`.
    pub base_tensors: Vec<Vec<Vec<f64>>>,
    pub weights: Vec<WeightSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum MomentSelector {
    /// Slot-1 marginal probability of a single state.
    Marginal { state: usize },
    /// Arbitrary linear functional over joint types.
    Linear { coeffs: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTerm {
    pub coeffs: Vec<Vec<f64>>,
    pub selector: MomentSelector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSpec {
    pub base: Vec<Vec<f64>>,
    #[serde(default)]
    pub moment_terms: Vec<MomentTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_corr: usize,
    pub n_states: usize,
    pub n_actions: usize,
    pub discount: f64,
    pub horizon: Horizon,
    pub kernel: KernelSpec,
    pub reward: RewardSpec,
    /// Kept raw here; validation builds the `MeanField`.
    pub initial_meanfield: Vec<f64>,
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::BadShape(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::BadShape(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horizon_parses_both_forms() {
        let h: Horizon = serde_json::from_str("3").unwrap();
        assert_eq!(h, Horizon::Finite(3));
        let h: Horizon = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(h, Horizon::Infinite);
        assert!(serde_json::from_str::<Horizon>("0").is_err());
        assert!(serde_json::from_str::<Horizon>("\"forever\"").is_err());
        assert_eq!(serde_json::to_string(&Horizon::Infinite).unwrap(), "\"inf\"");
    }

    #[test]
    fn selector_tagging() {
        let s: MomentSelector = serde_json::from_str(r#"{"type":"marginal","state":1}"#).unwrap();
        assert_eq!(s, MomentSelector::Marginal { state: 1 });
        let s: MomentSelector =
            serde_json::from_str(r#"{"type":"linear","coeffs":[0.0,1.0]}"#).unwrap();
        assert_eq!(s, MomentSelector::Linear { coeffs: vec![0.0, 1.0] });
    }
}
