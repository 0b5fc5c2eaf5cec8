use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentError, LearnerConfig, QNetwork, StateSpec};
use crate::ktu::NamedTensor;
use crate::linalg::Matrix;
use crate::Scalar;

pub const POLICY_FORMAT: &str = "dqn-policy";
pub const POLICY_VERSION: u32 = 1;

const NAMES: [&str; 6] = ["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias", "out.weight", "out.bias"];

/// Online Q-network plus the config and state layout it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyCheckpoint {
    pub format: String,
    pub version: u32,
    pub agent_id: String,
    pub config: LearnerConfig,
    pub state: StateSpec,
    pub steps: u64,
    pub tensors: Vec<NamedTensor>,
}

impl PolicyCheckpoint {
    pub fn new<T: Scalar>(agent_id: &str, config: &LearnerConfig, state: StateSpec, steps: u64, q: &QNetwork<T>) -> Self {
        let tensors = NAMES
            .iter()
            .zip(&q.tensors)
            .map(|(name, m)| NamedTensor { name: (*name).into(), rows: m.rows(), cols: m.cols(), data: m.as_slice().iter().map(|x| x.f64()).collect() })
            .collect();
        Self { format: POLICY_FORMAT.into(), version: POLICY_VERSION, agent_id: agent_id.into(), config: config.clone(), state, steps, tensors }
    }

    pub fn network<T: Scalar>(&self) -> Result<QNetwork<T>, AgentError> {
        if self.format != POLICY_FORMAT || self.version != POLICY_VERSION {
            return Err(AgentError::Checkpoint(format!("unsupported format {} v{}", self.format, self.version)));
        }
        if self.tensors.len() != NAMES.len() || self.tensors.iter().zip(NAMES).any(|(t, n)| t.name != n) {
            return Err(AgentError::Checkpoint("unexpected tensor list".into()));
        }
        let mut tensors = Vec::with_capacity(6);
        for t in &self.tensors {
            if t.data.len() != t.rows * t.cols {
                return Err(AgentError::Checkpoint(format!("{}: wrong element count", t.name)));
            }
            tensors.push(Matrix::from_vec(t.rows, t.cols, t.data.iter().map(|&x| T::of(x)).collect()));
        }
        let q = QNetwork { tensors };
        if q.state_dim() != self.state.dim() || q.hidden() != self.config.hidden {
            return Err(AgentError::Checkpoint(format!(
                "network {}x{} does not match state dim {} / hidden {}",
                q.state_dim(),
                q.hidden(),
                self.state.dim(),
                self.config.hidden
            )));
        }
        Ok(q)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<(), AgentError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read<R: Read>(reader: R) -> Result<Self, AgentError> {
        Ok(serde_json::from_reader(reader)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
