//! Versioned JSON checkpoint with the config embedded.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KtuConfig, KtuError, KtuModel, KtuParameters};
use crate::linalg::Matrix;
use crate::Scalar;

pub const CHECKPOINT_FORMAT: &str = "ktu-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtuCheckpoint {
    pub format: String,
    pub version: u32,
    pub config: KtuConfig,
    pub feature_dim: usize,
    pub tensors: Vec<NamedTensor>,
    /// Free-form companions such as the input scaler.
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

impl KtuCheckpoint {
    pub fn from_model<T: Scalar>(model: &KtuModel<T>) -> Self {
        let p = model.parameters();
        let tensors = p
            .names
            .iter()
            .zip(&p.tensors)
            .map(|(name, m)| NamedTensor { name: name.clone(), rows: m.rows(), cols: m.cols(), data: m.as_slice().iter().map(|x| x.f64()).collect() })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: model.config().clone(),
            feature_dim: model.feature_dim(),
            tensors,
            extra: BTreeMap::new(),
        }
    }

    /// Rebuilds the model. With `expected`, the stored architecture must
    /// match it.
    pub fn to_model<T: Scalar>(&self, expected: Option<&KtuConfig>) -> Result<KtuModel<T>, KtuError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(KtuError::Checkpoint(format!("unknown format `{}`", self.format)));
        }
        if self.version != CHECKPOINT_VERSION {
            return Err(KtuError::Checkpoint(format!("unsupported version {}", self.version)));
        }
        if let Some(cfg) = expected {
            self.config.check_compatible(cfg)?;
        }
        let mut names = Vec::with_capacity(self.tensors.len());
        let mut tensors = Vec::with_capacity(self.tensors.len());
        for t in &self.tensors {
            if t.data.len() != t.rows * t.cols {
                return Err(KtuError::Checkpoint(format!("{}: {} values for a {}x{} tensor", t.name, t.data.len(), t.rows, t.cols)));
            }
            names.push(t.name.clone());
            tensors.push(Matrix::from_vec(t.rows, t.cols, t.data.iter().map(|&x| T::of(x)).collect()));
        }
        KtuModel::from_parameters(self.config.clone(), self.feature_dim, KtuParameters { names, tensors })
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), KtuError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, KtuError> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), KtuError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, KtuError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> KtuConfig {
        KtuConfig { d_model: 4, n_heads: 1, n_layers: 1, d_ff: 8, window: 3, ..KtuConfig::default() }
    }

    #[test]
    fn round_trip() {
        let m = KtuModel::<f64>::new(cfg(), 5).unwrap();
        let ck = KtuCheckpoint::from_model(&m);
        let mut buf = Vec::new();
        ck.write(&mut buf).unwrap();
        let back = KtuCheckpoint::read(buf.as_slice()).unwrap();
        let m2: KtuModel<f64> = back.to_model(Some(&cfg())).unwrap();
        assert_eq!(m.parameters(), m2.parameters());
    }

    #[test]
    fn rejects_mismatch() {
        let m = KtuModel::<f64>::new(cfg(), 5).unwrap();
        let ck = KtuCheckpoint::from_model(&m);
        let other = KtuConfig { d_model: 8, ..cfg() };
        let err = ck.to_model::<f64>(Some(&other)).unwrap_err();
        assert!(matches!(err, KtuError::ConfigMismatch { field: "d_model", .. }));

        let mut bad = ck.clone();
        bad.version = 99;
        assert!(bad.to_model::<f64>(None).is_err());
        let mut bad = ck;
        bad.tensors[0].data.pop();
        assert!(bad.to_model::<f64>(None).is_err());
    }
}
