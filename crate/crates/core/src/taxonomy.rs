//! The value system: top-level values, their micro-values and circumplex angles.
//!
//! Micro-values partition into values: every micro-value has exactly one
//! parent and every value owns at least one micro-value. Angles only drive
//! circumplex projections.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_TAXONOMY: &str = include_str!("../data/default_taxonomy.json");

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MicroValueId(pub String);

macro_rules! id_impls {
    ($t:ty) => {
        impl $t {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
        impl From<&str> for $t {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }
        impl From<String> for $t {
            fn from(s: String) -> Self {
                Self(s)
            }
        }
    };
}
id_impls!(ValueId);
id_impls!(MicroValueId);

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("malformed taxonomy document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("taxonomy declares no values")]
    NoValues,
    #[error("duplicate value id `{0}`")]
    DuplicateValue(String),
    #[error("micro-value `{0}` is assigned more than once")]
    DuplicateMicroValue(String),
    #[error("micro-value `{micro}` assigned to both `{first}` and `{second}`")]
    MultipleParents {
        micro: String,
        first: String,
        second: String,
    },
    #[error("micro-value `{0}` has no parent")]
    MissingParent(String),
    #[error("micro-value `{micro}` names unknown parent `{parent}`")]
    UnknownParent { micro: String, parent: String },
    #[error("value `{0}` has no micro-values")]
    EmptyAssignment(String),
    #[error("value `{value}` has malformed angle {angle}; expected degrees in [0, 360)")]
    MalformedAngle { value: String, angle: f64 },
    #[error("values `{first}` and `{second}` share circumplex angle {angle}")]
    DuplicateAngle {
        first: String,
        second: String,
        angle: f64,
    },
    #[error("unknown value `{0}`")]
    UnknownValue(String),
    #[error("unknown micro-value `{0}`")]
    UnknownMicroValue(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Value {
    pub id: ValueId,
    pub label: String,
    #[serde(rename = "angle_deg")]
    pub circumplex_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroValue {
    pub id: MicroValueId,
    pub label: String,
    pub parent: ValueId,
}

/// Raw on-disk shape; `parent` is optional so a missing parent is reported
/// as a partition error rather than a generic parse failure.
#[derive(Deserialize)]
struct TaxonomyDoc {
    values: Vec<Value>,
    micro_values: Vec<MicroValueDoc>,
}

#[derive(Deserialize)]
struct MicroValueDoc {
    id: MicroValueId,
    #[serde(default)]
    label: String,
    #[serde(default)]
    parent: Option<ValueId>,
}

#[derive(Serialize)]
struct TaxonomyOut<'a> {
    values: &'a [Value],
    micro_values: &'a [MicroValue],
}

/// A validated value system. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    values: Vec<Value>,
    micro_values: Vec<MicroValue>,
    assignment: BTreeMap<ValueId, Vec<MicroValueId>>,
    value_index: HashMap<ValueId, usize>,
    micro_index: HashMap<MicroValueId, usize>,
    micro_parent: Vec<usize>,
}

impl Taxonomy {
    /// The bundled 10-value / 56-micro-value default. Micro-value labels are
    /// placeholders.
    pub fn default_schwartz() -> Self {
        Self::from_json(DEFAULT_TAXONOMY).expect("bundled taxonomy is valid")
    }

    pub fn from_json(doc: &str) -> Result<Self, TaxonomyError> {
        let doc: TaxonomyDoc = serde_json::from_str(doc)?;
        let mut micro_values = Vec::with_capacity(doc.micro_values.len());
        let mut seen: HashMap<MicroValueId, ValueId> = HashMap::new();
        for m in doc.micro_values {
            let parent = match m.parent {
                Some(p) if !p.0.is_empty() => p,
                _ => return Err(TaxonomyError::MissingParent(m.id.0)),
            };
            if let Some(first) = seen.get(&m.id) {
                if *first != parent {
                    return Err(TaxonomyError::MultipleParents {
                        micro: m.id.0,
                        first: first.0.clone(),
                        second: parent.0,
                    });
                }
                return Err(TaxonomyError::DuplicateMicroValue(m.id.0));
            }
            seen.insert(m.id.clone(), parent.clone());
            micro_values.push(MicroValue {
                id: m.id,
                label: m.label,
                parent,
            });
        }
        Self::new(doc.values, micro_values)
    }

    pub fn new(values: Vec<Value>, micro_values: Vec<MicroValue>) -> Result<Self, TaxonomyError> {
        if values.is_empty() {
            return Err(TaxonomyError::NoValues);
        }
        let mut value_index = HashMap::with_capacity(values.len());
        for (i, v) in values.iter().enumerate() {
            let a = v.circumplex_angle;
            if !a.is_finite() || !(0.0..360.0).contains(&a) {
                return Err(TaxonomyError::MalformedAngle {
                    value: v.id.0.clone(),
                    angle: a,
                });
            }
            if value_index.insert(v.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateValue(v.id.0.clone()));
            }
            if let Some(other) = values[..i].iter().find(|o| o.circumplex_angle == a) {
                return Err(TaxonomyError::DuplicateAngle {
                    first: other.id.0.clone(),
                    second: v.id.0.clone(),
                    angle: a,
                });
            }
        }

        let mut assignment: BTreeMap<ValueId, Vec<MicroValueId>> =
            values.iter().map(|v| (v.id.clone(), Vec::new())).collect();
        let mut micro_index = HashMap::with_capacity(micro_values.len());
        let mut micro_parent = Vec::with_capacity(micro_values.len());
        let mut ids = HashSet::new();
        for (i, m) in micro_values.iter().enumerate() {
            if !ids.insert(&m.id) {
                return Err(TaxonomyError::DuplicateMicroValue(m.id.0.clone()));
            }
            let Some(&parent) = value_index.get(&m.parent) else {
                return Err(TaxonomyError::UnknownParent {
                    micro: m.id.0.clone(),
                    parent: m.parent.0.clone(),
                });
            };
            assignment
                .get_mut(&m.parent)
                .expect("parent indexed")
                .push(m.id.clone());
            micro_index.insert(m.id.clone(), i);
            micro_parent.push(parent);
        }
        if let Some(v) = values.iter().find(|v| assignment[&v.id].is_empty()) {
            return Err(TaxonomyError::EmptyAssignment(v.id.0.clone()));
        }

        Ok(Self {
            values,
            micro_values,
            assignment,
            value_index,
            micro_index,
            micro_parent,
        })
    }

    pub fn to_json(&self) -> String {
        let out = TaxonomyOut {
            values: &self.values,
            micro_values: &self.micro_values,
        };
        serde_json::to_string_pretty(&out).expect("taxonomy serializes")
    }

    pub fn values(&self) -> &[Value] {
        &self.values
    }

    pub fn micro_values(&self) -> &[MicroValue] {
        &self.micro_values
    }

    pub fn value_ids(&self) -> Vec<ValueId> {
        self.values.iter().map(|v| v.id.clone()).collect()
    }

    pub fn value(&self, id: &ValueId) -> Result<&Value, TaxonomyError> {
        self.value_index(id).map(|i| &self.values[i])
    }

    pub fn value_index(&self, id: &ValueId) -> Result<usize, TaxonomyError> {
        self.value_index
            .get(id)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownValue(id.0.clone()))
    }

    pub fn micro_index(&self, id: &MicroValueId) -> Result<usize, TaxonomyError> {
        self.micro_index
            .get(id)
            .copied()
            .ok_or_else(|| TaxonomyError::UnknownMicroValue(id.0.clone()))
    }

    /// Index (into [`Taxonomy::values`]) of the parent of a micro-value.
    pub fn parent_index(&self, micro: &MicroValueId) -> Result<usize, TaxonomyError> {
        self.micro_index(micro).map(|i| self.micro_parent[i])
    }

    pub fn parent_of(&self, micro: &MicroValueId) -> Result<&ValueId, TaxonomyError> {
        self.parent_index(micro).map(|i| &self.values[i].id)
    }

    /// The assignment set U(v), in taxonomy order.
    pub fn micro_values_of(&self, v: &ValueId) -> Result<&[MicroValueId], TaxonomyError> {
        self.assignment
            .get(v)
            .map(Vec::as_slice)
            .ok_or_else(|| TaxonomyError::UnknownValue(v.0.clone()))
    }

    /// Values sorted ascending by circumplex angle.
    pub fn circumplex_order(&self) -> Vec<ValueId> {
        let mut order: Vec<&Value> = self.values.iter().collect();
        order.sort_by(|a, b| a.circumplex_angle.total_cmp(&b.circumplex_angle));
        order.into_iter().map(|v| v.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
