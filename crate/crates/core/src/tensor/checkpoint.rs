//! JSON container for named parameter tensors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Matrix, ParamStore};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format version {0}")]
    Version(u32),
    #[error("checkpoint does not match the model: {0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub config: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_store(kind: &str, config: serde_json::Value, store: &ParamStore) -> Self {
        let tensors = store
            .ids()
            .map(|id| {
                let v = store.value(id);
                NamedTensor { name: store.name(id).to_string(), shape: [v.rows(), v.cols()], values: v.data().to_vec() }
            })
            .collect();
        Self { format_version: FORMAT_VERSION, kind: kind.to_string(), config, tensors }
    }

    /// Copies tensor values into a store with the same names and shapes.
    pub fn load_into(&self, store: &mut ParamStore) -> Result<(), CheckpointError> {
        if self.tensors.len() != store.len() {
            return Err(CheckpointError::Mismatch(format!("{} tensors vs {} parameters", self.tensors.len(), store.len())));
        }
        for t in &self.tensors {
            let id = store.id(&t.name).map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
            let m = Matrix::from_vec(t.shape[0], t.shape[1], t.values.clone())
                .map_err(|e| CheckpointError::Mismatch(e.to_string()))?;
            if m.shape() != store.value(id).shape() {
                return Err(CheckpointError::Mismatch(format!("shape of {}", t.name)));
            }
            *store.value_mut(id) = m;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let ck: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version(ck.format_version));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn store_round_trips_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut store = ParamStore::new();
        store.insert_uniform("a", 3, 4, &mut rng);
        store.insert_zeros("b", 1, 4);
        let ck = Checkpoint::from_store("test", serde_json::json!({"h": 4}), &store);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        let mut other = store.clone();
        other.zero_all();
        loaded.load_into(&mut other).unwrap();
        assert_eq!(other, store);
    }
}
