use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParameterStore};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

/// Serialized parameters plus the configuration that produced them.
///
/// Written as JSON with sorted keys at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub parameters: BTreeMap<String, TensorRecord>,
}

impl Checkpoint {
    pub fn new(config: serde_json::Value, params: &ParameterStore) -> Self {
        let parameters = params
            .iter()
            .map(|(name, m)| {
                (
                    name.to_string(),
                    TensorRecord {
                        shape: [m.rows(), m.cols()],
                        values: m.data().to_vec(),
                    },
                )
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config,
            parameters,
        }
    }

    pub fn to_store(&self) -> ParameterStore {
        let mut store = ParameterStore::new();
        for (name, rec) in &self.parameters {
            store.insert(
                name.clone(),
                Matrix::from_vec(rec.shape[0], rec.shape[1], rec.values.clone()),
            );
        }
        store
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        // Round-trip through `Value` so nested config keys are sorted too.
        let value = serde_json::to_value(self)?;
        serde_json::to_string_pretty(&value)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
